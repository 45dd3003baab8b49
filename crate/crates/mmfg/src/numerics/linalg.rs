//! Dense linear-algebra kernels: LU inversion with an exact condition check,
//! a cyclic-Jacobi symmetric eigensolver, and the scaling-and-squaring matrix
//! exponential.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// LU factorization with partial pivoting. Returns `None` when a pivot
/// underflows relative to the matrix scale (numerically singular).
fn lu_inverse(m: &Matrix) -> Option<Matrix> {
    let n = m.rows();
    debug_assert!(m.is_square());
    if n == 0 {
        return Some(Matrix::zeros(0, 0));
    }
    // Augmented [A | I], Gauss-Jordan with partial pivoting.
    let mut a = vec![0.0f64; n * 2 * n];
    for i in 0..n {
        for j in 0..n {
            a[i * 2 * n + j] = m.get(i, j);
        }
        a[i * 2 * n + n + i] = 1.0;
    }
    let scale = m.max_abs().max(1.0);
    let tiny = scale * 1e-300;
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * 2 * n + col].abs();
        for r in (col + 1)..n {
            let v = a[r * 2 * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= tiny {
            return None;
        }
        if piv != col {
            for j in 0..2 * n {
                a.swap(col * 2 * n + j, piv * 2 * n + j);
            }
        }
        let d = a[col * 2 * n + col];
        for j in 0..2 * n {
            a[col * 2 * n + j] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * 2 * n + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..2 * n {
                a[r * 2 * n + j] -= f * a[col * 2 * n + j];
            }
        }
    }
    let mut inv = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            inv.set(i, j, a[i * 2 * n + n + j]);
        }
    }
    inv.all_finite().then_some(inv)
}

/// Invert a square matrix, rejecting it when the 1-norm condition number
/// exceeds `cond_threshold`. The condition number is computed exactly from
/// the inverse; at these sizes there is no reason to estimate it.
pub fn invert_checked(m: &Matrix, cond_threshold: f64) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "cannot invert a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let inv = lu_inverse(m).ok_or(Error::IllConditioned {
        estimate: f64::INFINITY,
        threshold: cond_threshold,
    })?;
    let cond = m.norm_1() * inv.norm_1();
    if !cond.is_finite() || cond > cond_threshold {
        return Err(Error::IllConditioned {
            estimate: cond,
            threshold: cond_threshold,
        });
    }
    Ok(inv)
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method.
/// The input is symmetrized first; asymmetry is the caller's problem.
pub fn sym_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension("eigenvalues need a square matrix".into()));
    }
    let n = m.rows();
    let mut a = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m.get(i, j) + m.get(j, i));
        }
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let scale = m.max_abs().max(1.0);
    let tol = 1e-14 * scale;
    for _sweep in 0..64 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

/// Smallest singular value via the eigenvalues of `m^T m`.
pub fn min_singular_value(m: &Matrix) -> f64 {
    let mtm = &m.transpose() * m;
    match sym_eigenvalues(&mtm) {
        Ok(eigs) => eigs.first().copied().unwrap_or(0.0).max(0.0).sqrt(),
        Err(_) => 0.0,
    }
}

// Pade order selection thresholds from Higham (2005), "The scaling and
// squaring method for the matrix exponential revisited".
#[allow(clippy::excessive_precision)]
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn pade_coeffs(m: usize) -> Vec<f64> {
    // b_i = (2m-i)! m! / ((2m)! (m-i)! i!)
    let fact = |k: usize| -> f64 { (1..=k).map(|v| v as f64).product::<f64>().max(1.0) };
    (0..=m)
        .map(|i| fact(2 * m - i) * fact(m) / (fact(2 * m) * fact(m - i) * fact(i)))
        .collect()
}

fn pade_apply(a: &Matrix, m: usize) -> Result<Matrix> {
    let n = a.rows();
    let id = Matrix::identity(n);
    let b = pade_coeffs(m);
    // Powers a^0..a^m, fine at these orders and sizes.
    let mut pows = vec![id.clone()];
    for k in 1..=m {
        pows.push(&pows[k - 1] * a);
    }
    let mut u = Matrix::zeros(n, n); // odd part
    let mut v = Matrix::zeros(n, n); // even part
    for (k, p) in pows.iter().enumerate() {
        if k % 2 == 1 {
            u.axpy(b[k], p);
        } else {
            v.axpy(b[k], p);
        }
    }
    let num = &v + &u;
    let den = &v - &u;
    let den_inv = invert_checked(&den, 1e15).map_err(|_| Error::Dimension(
        "Pade denominator singular in expm".into(),
    ))?;
    Ok(&den_inv * &num)
}

fn pade13_apply(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let id = Matrix::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    // u = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let mut w1 = a6.scale(b[13]);
    w1.axpy(b[11], &a4);
    w1.axpy(b[9], &a2);
    let mut w2 = &a6 * &w1;
    w2.axpy(b[7], &a6);
    w2.axpy(b[5], &a4);
    w2.axpy(b[3], &a2);
    w2.axpy(b[1], &id);
    let u = a * &w2;
    // v = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let mut z1 = a6.scale(b[12]);
    z1.axpy(b[10], &a4);
    z1.axpy(b[8], &a2);
    let mut v = &a6 * &z1;
    v.axpy(b[6], &a6);
    v.axpy(b[4], &a4);
    v.axpy(b[2], &a2);
    v.axpy(b[0], &id);
    let num = &v + &u;
    let den = &v - &u;
    let den_inv = invert_checked(&den, 1e15).map_err(|_| Error::Dimension(
        "Pade denominator singular in expm".into(),
    ))?;
    Ok(&den_inv * &num)
}

/// Matrix exponential by scaling and squaring with diagonal Pade kernels,
/// order selected from the exact 1-norm.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expm needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let norm = m.norm_1();
    for &(order, theta) in &THETA {
        if norm <= theta {
            return pade_apply(m, order);
        }
    }
    let s = if norm <= THETA_13 {
        0
    } else {
        ((norm / THETA_13).log2().ceil() as i32).max(0) as u32
    };
    let scaled = m.scale(0.5f64.powi(s as i32));
    let mut e = pade13_apply(&scaled)?;
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::Matrix;

    fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).max_abs()
    }

    #[test]
    fn invert_identity_and_diag() {
        let id = Matrix::identity(3);
        assert_eq!(invert_checked(&id, 1e12).unwrap(), id);
        let d = Matrix::diag(&[2.0, 4.0]);
        assert_eq!(
            invert_checked(&d, 1e12).unwrap(),
            Matrix::diag(&[0.5, 0.25])
        );
    }

    #[test]
    fn invert_rejects_rank_deficient() {
        let m = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        match invert_checked(&m, 1e12) {
            Err(crate::error::Error::IllConditioned { estimate, .. }) => {
                assert!(estimate > 1e12)
            }
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }

    #[test]
    fn invert_rejects_above_threshold() {
        let m = Matrix::diag(&[1.0, 1e-8]);
        assert!(invert_checked(&m, 1e6).is_err());
        assert!(invert_checked(&m, 1e12).is_ok());
    }

    #[test]
    fn jacobi_eigenvalues() {
        let m = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let e = sym_eigenvalues(&m).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
        let sv = min_singular_value(&Matrix::diag(&[3.0, -0.25, 1.0]));
        assert!((sv - 0.25).abs() < 1e-12);
    }

    #[test]
    fn expm_zero_is_identity() {
        let e = expm(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e, Matrix::identity(3));
    }

    #[test]
    fn expm_diagonal() {
        let e = expm(&Matrix::diag(&[1.0, 2.0])).unwrap();
        let want = Matrix::diag(&[1f64.exp(), 2f64.exp()]);
        assert!(max_diff(&e, &want) < 1e-13 * 2f64.exp());
    }

    #[test]
    fn expm_nilpotent() {
        let m = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let e = expm(&m).unwrap();
        let want = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert!(max_diff(&e, &want) < 1e-15);
    }

    #[test]
    fn expm_rotation_quarter_turn() {
        let th = std::f64::consts::FRAC_PI_2;
        let m = Matrix::from_rows(&[&[0.0, -th], &[th, 0.0]]).unwrap();
        let e = expm(&m).unwrap();
        let want = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        assert!(max_diff(&e, &want) < 1e-12);
    }

    #[test]
    fn expm_non_square_rejected() {
        assert!(expm(&Matrix::zeros(2, 3)).is_err());
    }

    // exp(m) exp(-m) = I for random-ish matrices with norm up to 5.
    #[test]
    fn expm_inverse_property() {
        let mut state = 0x12345678u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
        };
        for trial in 0..20 {
            let n = 2 + trial % 4;
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, next());
                }
            }
            let scale = 5.0 / m.norm_1().max(1e-9) * (0.1 + 0.9 * ((trial % 7) as f64 / 7.0));
            let m = m.scale(scale.min(5.0));
            let e = expm(&m).unwrap();
            let einv = expm(&m.scale(-1.0)).unwrap();
            let prod = &e * &einv;
            assert!(
                max_diff(&prod, &Matrix::identity(n)) < 1e-10,
                "inverse property failed at trial {trial}"
            );
        }
    }

    // exp(B(t-s)) exp(B(s-r)) = exp(B(t-r)).
    #[test]
    fn expm_semigroup_property() {
        let b = Matrix::from_rows(&[
            &[0.1, 1.0, -0.3],
            &[0.7, -0.2, 0.4],
            &[-0.5, 0.2, 0.3],
        ])
        .unwrap();
        let (t, s, r) = (1.0, 0.4, -0.7);
        let lhs = &expm(&b.scale(t - s)).unwrap() * &expm(&b.scale(s - r)).unwrap();
        let rhs = expm(&b.scale(t - r)).unwrap();
        assert!(max_diff(&lhs, &rhs) < 1e-10);
    }
}
