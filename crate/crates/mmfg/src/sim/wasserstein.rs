//! Exact one-dimensional 2-Wasserstein distances between empirical measures.

use super::bundle::EmpiricalMeasure;
use crate::error::{Error, Result};

/// Exact W2 between two equally weighted scalar empirical measures with the
/// same atom count, by the order-statistics coupling: sort both atom lists,
/// then `W2^2 = (1/n) sum (a_(i) - b_(i))^2`.
///
/// Unequal counts or dimension above one are rejected; resampling would
/// change the measures being compared.
pub fn wasserstein2_1d(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "exact Wasserstein is one-dimensional only, got dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.count() != b.count() {
        return Err(Error::Unsupported(format!(
            "atom counts differ ({} vs {}); refusing to resample",
            a.count(),
            b.count()
        )));
    }
    let mut xs = a.atoms_flat().to_vec();
    let mut ys = b.atoms_flat().to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    Ok(w2_squared_sorted(&xs, &ys).sqrt())
}

/// `W2^2` for pre-sorted scalar atom lists of equal length.
#[inline]
pub(crate) fn w2_squared_sorted(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    xs.iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

/// `W2^2` between two sorted scalar empirical measures with arbitrary atom
/// counts, integrating the squared gap of the two piecewise-constant
/// quantile functions over the merged breakpoints. Exact, no resampling.
pub(crate) fn w2_squared_sorted_quantile(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let m = ys.len();
    debug_assert!(n > 0 && m > 0);
    if n == m {
        return w2_squared_sorted(xs, ys);
    }
    let mut total = 0.0;
    let mut q = 0.0f64;
    let mut i = 0usize;
    let mut j = 0usize;
    while i < n && j < m {
        let qi = (i + 1) as f64 / n as f64;
        let qj = (j + 1) as f64 / m as f64;
        let q_next = qi.min(qj);
        let gap = xs[i] - ys[j];
        total += (q_next - q) * gap * gap;
        if qi <= q_next + f64::EPSILON {
            i += 1;
        }
        if qj <= q_next + f64::EPSILON {
            j += 1;
        }
        q = q_next;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let a = EmpiricalMeasure::from_scalars(&[3.0, -1.0, 0.5]).unwrap();
        assert_eq!(wasserstein2_1d(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn point_masses_at_zero_and_one() {
        let a = EmpiricalMeasure::from_scalars(&[0.0; 5]).unwrap();
        let b = EmpiricalMeasure::from_scalars(&[1.0; 5]).unwrap();
        assert_eq!(wasserstein2_1d(&a, &b).unwrap(), 1.0);
    }

    // Brute force over the two pairings of {0,2} vs {1,3}: sorted coupling
    // gives ((0-1)^2 + (2-3)^2)/2 = 1, crossed gives 5, so W2^2 = 1.
    #[test]
    fn two_atom_example_matches_brute_force() {
        let a = EmpiricalMeasure::from_scalars(&[0.0, 2.0]).unwrap();
        let b = EmpiricalMeasure::from_scalars(&[3.0, 1.0]).unwrap();
        let w2 = wasserstein2_1d(&a, &b).unwrap();
        let direct = ((0.0f64 - 1.0).powi(2) + (2.0f64 - 3.0).powi(2)) / 2.0;
        let crossed = ((0.0f64 - 3.0).powi(2) + (2.0f64 - 1.0).powi(2)) / 2.0;
        assert_eq!(w2 * w2, direct.min(crossed));
        assert_eq!(w2 * w2, 1.0);
    }

    #[test]
    fn rejects_unsupported_inputs() {
        let a = EmpiricalMeasure::from_scalars(&[0.0, 1.0]).unwrap();
        let b = EmpiricalMeasure::from_scalars(&[0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(wasserstein2_1d(&a, &b), Err(Error::Unsupported(_))));
        let c = EmpiricalMeasure::new(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(wasserstein2_1d(&c, &c), Err(Error::Unsupported(_))));
    }

    use proptest::prelude::*;

    proptest! {
        // Sorted coupling is optimal: it never exceeds the identity pairing
        // (or any single swap of it).
        #[test]
        fn sorted_coupling_is_optimal(
            xs in proptest::collection::vec(-50.0f64..50.0, 2..40),
            ys_seed in proptest::collection::vec(-50.0f64..50.0, 2..40),
            i in 0usize..40,
            j in 0usize..40,
        ) {
            let n = xs.len().min(ys_seed.len());
            let xs = &xs[..n];
            let ys = &ys_seed[..n];
            let a = EmpiricalMeasure::from_scalars(xs).unwrap();
            let b = EmpiricalMeasure::from_scalars(ys).unwrap();
            let w2 = wasserstein2_1d(&a, &b).unwrap();
            let identity: f64 =
                xs.iter().zip(ys).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64;
            prop_assert!(w2 * w2 <= identity + 1e-12);
            // swapping one pair of targets never beats the sorted coupling
            let (i, j) = (i % n, j % n);
            let mut swapped = ys.to_vec();
            swapped.swap(i, j);
            let cost: f64 = xs
                .iter()
                .zip(&swapped)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                / n as f64;
            prop_assert!(w2 * w2 <= cost + 1e-12);
        }

        // Translating both measures by the same shift leaves the distance
        // unchanged; translating one shifts it by at most |delta|.
        #[test]
        fn translation_behaviour(
            xs in proptest::collection::vec(-10.0f64..10.0, 2..20),
            delta in -5.0f64..5.0,
        ) {
            let a = EmpiricalMeasure::from_scalars(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + delta).collect();
            let b = EmpiricalMeasure::from_scalars(&shifted).unwrap();
            let w2 = wasserstein2_1d(&a, &b).unwrap();
            prop_assert!((w2 - delta.abs()).abs() < 1e-9);
        }
    }

    // The quantile integral agrees with the equal-count coupling when one
    // atom list is replicated, and with a hand-computed unequal case.
    #[test]
    fn quantile_route_matches_replication() {
        let xs = [0.0, 1.0, 4.0];
        let mut reps = Vec::new();
        for x in xs {
            for _ in 0..4 {
                reps.push(x);
            }
        }
        let ys: Vec<f64> = (0..12).map(|i| i as f64 * 0.3 - 1.0).collect();
        let mut ys_sorted = ys.clone();
        ys_sorted.sort_by(f64::total_cmp);
        let via_quantile = w2_squared_sorted_quantile(&xs, &ys_sorted);
        let via_equal = w2_squared_sorted(&reps, &ys_sorted);
        assert!((via_quantile - via_equal).abs() < 1e-12);
        // Same answer with the arguments swapped.
        let swapped = w2_squared_sorted_quantile(&ys_sorted, &xs);
        assert!((swapped - via_equal).abs() < 1e-12);
    }
}
