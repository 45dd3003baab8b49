//! Quantitative verification harnesses: coupled-system convergence rates
//! (propagation of chaos, law of large numbers for the particle average,
//! empirical-measure distances) and unilateral-deviation gap measurements,
//! with ordinary least-squares rate fitting on log-log scales.
//!
//! Every harness couples its systems through shared counter-based noise
//! streams, so pathwise differences reflect dynamics rather than sampling.

use crate::error::{Error, Result};
use crate::model::LqgModel;
use crate::riccati::RiccatiSolution;
use crate::sim::engine::{
    control_moment, estimate_costs, mean_stderr, ControlTweak, Deviation, Dynamics, FiniteStepper,
    LimitStepper, MeanStderr, Player,
};
use crate::sim::wasserstein::{w2_squared_sorted, w2_squared_sorted_quantile};
use crate::sim::{simulate_finite_game_deviated, MinorRecord, NoiseSource, Record};
use rayon::prelude::*;

/// Least-squares fit of `log(error)` against `log(size)`.
#[derive(Clone, Debug)]
pub struct RateFit {
    pub sizes: Vec<usize>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares on `(log N, log error)`. Needs at least three
/// points and strictly positive errors.
pub fn fit_rate(sizes: &[usize], errors: &[f64]) -> Result<RateFit> {
    if sizes.len() != errors.len() {
        return Err(Error::InvalidArgument(
            "sizes and errors must have equal length".into(),
        ));
    }
    if sizes.len() < 3 {
        return Err(Error::InvalidArgument(
            "rate fitting needs at least 3 points".into(),
        ));
    }
    if let Some(bad) = errors.iter().find(|e| !e.is_finite() || **e <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rate fitting needs positive errors, got {bad}"
        )));
    }
    let xs: Vec<f64> = sizes.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        sizes: sizes.to_vec(),
        errors: errors.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Per-size errors of the coupled finite-vs-limit comparison.
#[derive(Clone, Debug)]
pub struct ChaosPoint {
    pub n: usize,
    /// `E sup_t |X0_finite - X0_limit|^2`
    pub err_major: MeanStderr,
    /// `E sup_t |X1_finite - X1_limit|^2` (first minor)
    pub err_minor: MeanStderr,
    /// `E sup_t W2^2(mu^N_t, nu^N_t)` (scalar states only)
    pub err_w2: Option<MeanStderr>,
}

#[derive(Clone, Debug)]
pub struct ChaosReport {
    pub points: Vec<ChaosPoint>,
    pub fit_major: RateFit,
    pub fit_minor: RateFit,
    pub fit_w2: Option<RateFit>,
}

fn validate_size_list(n_list: &[usize]) -> Result<()> {
    if n_list.len() < 3 {
        return Err(Error::InvalidArgument(
            "size list needs at least 3 entries".into(),
        ));
    }
    if n_list[0] < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "size list must be strictly increasing with every entry >= 2".into(),
        ));
    }
    Ok(())
}

/// Couple the finite game with the limit system (M = N particles) on shared
/// streams and measure pathwise sup-square gaps, plus the exact Wasserstein
/// gap between the two empirical minor measures when states are scalar.
pub fn chaos_experiment(
    model: &LqgModel,
    ric: &RiccatiSolution,
    n_list: &[usize],
    n_paths: usize,
    seed: u64,
    with_wasserstein: bool,
) -> Result<ChaosReport> {
    validate_size_list(n_list)?;
    if with_wasserstein && model.d != 1 {
        return Err(Error::Unsupported(
            "Wasserstein output needs scalar minor states".into(),
        ));
    }
    let grid = *ric.grid();
    let dy = Dynamics::new(model, ric, &grid)?;
    let noise = NoiseSource::new(seed);
    let d = model.d;

    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let stats: Vec<(f64, f64, f64)> = (0..n_paths)
            .into_par_iter()
            .map(|path| {
                let mut fin = FiniteStepper::new(&dy, noise, path, n, None);
                let mut lim = LimitStepper::new(&dy, noise, path, n);
                let mut sup0 = 0.0f64;
                let mut sup1 = 0.0f64;
                let mut supw = 0.0f64;
                let mut buf_a = vec![0.0; n * d];
                let mut buf_b = vec![0.0; n * d];
                for _ in 0..grid.n_steps() {
                    fin.step();
                    lim.step();
                    sup0 = sup0.max(dist2(&fin.x0, &lim.x0));
                    sup1 = sup1.max(dist2(&fin.minors[..d], &lim.minors[..d]));
                    if with_wasserstein {
                        buf_a.copy_from_slice(&fin.minors);
                        buf_b.copy_from_slice(&lim.minors);
                        buf_a.sort_by(f64::total_cmp);
                        buf_b.sort_by(f64::total_cmp);
                        supw = supw.max(w2_squared_sorted(&buf_a, &buf_b));
                    }
                }
                (sup0, sup1, supw)
            })
            .collect();
        let s0: Vec<f64> = stats.iter().map(|s| s.0).collect();
        let s1: Vec<f64> = stats.iter().map(|s| s.1).collect();
        let sw: Vec<f64> = stats.iter().map(|s| s.2).collect();
        points.push(ChaosPoint {
            n,
            err_major: mean_stderr(&s0),
            err_minor: mean_stderr(&s1),
            err_w2: with_wasserstein.then(|| mean_stderr(&sw)),
        });
    }

    let sizes: Vec<usize> = points.iter().map(|p| p.n).collect();
    let fit_major = fit_rate(
        &sizes,
        &points.iter().map(|p| p.err_major.mean).collect::<Vec<_>>(),
    )?;
    let fit_minor = fit_rate(
        &sizes,
        &points.iter().map(|p| p.err_minor.mean).collect::<Vec<_>>(),
    )?;
    let fit_w2 = if with_wasserstein {
        Some(fit_rate(
            &sizes,
            &points
                .iter()
                .map(|p| p.err_w2.unwrap().mean)
                .collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    Ok(ChaosReport {
        points,
        fit_major,
        fit_minor,
        fit_w2,
    })
}

/// `E sup_t |particle average - exact mean|^2` against the particle count:
/// the conditional law of large numbers, expected to decay like 1/M.
pub fn particle_average_gap(
    model: &LqgModel,
    ric: &RiccatiSolution,
    m_list: &[usize],
    n_paths: usize,
    seed: u64,
) -> Result<(Vec<(usize, MeanStderr)>, RateFit)> {
    validate_size_list(m_list)?;
    let grid = *ric.grid();
    let dy = Dynamics::new(model, ric, &grid)?;
    let noise = NoiseSource::new(seed);
    let d = model.d;

    let mut points = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let sups: Vec<f64> = (0..n_paths)
            .into_par_iter()
            .map(|path| {
                let mut lim = LimitStepper::new(&dy, noise, path, m);
                let mut avg = vec![0.0; d];
                let mut sup = 0.0f64;
                for _ in 0..grid.n_steps() {
                    lim.step();
                    lim.minor_average(&mut avg);
                    sup = sup.max(dist2(&avg, &lim.xbar));
                }
                sup
            })
            .collect();
        points.push((m, mean_stderr(&sups)));
    }
    let fit = fit_rate(
        &points.iter().map(|p| p.0).collect::<Vec<_>>(),
        &points.iter().map(|p| p.1.mean).collect::<Vec<_>>(),
    )?;
    Ok((points, fit))
}

#[derive(Clone, Debug)]
pub struct MeasureRatePoint {
    pub n: usize,
    /// `E sup_t W2^2(mu^N_t, mu^ref_t)`
    pub w2_squared: MeanStderr,
}

#[derive(Clone, Debug)]
pub struct MeasureRateReport {
    pub n_ref: usize,
    pub points: Vec<MeasureRatePoint>,
    pub fit: RateFit,
}

/// Distance between the empirical measure of the first `N` limit particles
/// and a reference empirical measure of `n_ref_factor * max(N)` particles
/// on the same common-noise path. Scalar minor states only.
pub fn empirical_measure_rate(
    model: &LqgModel,
    ric: &RiccatiSolution,
    n_list: &[usize],
    n_paths: usize,
    seed: u64,
    n_ref_factor: usize,
) -> Result<MeasureRateReport> {
    validate_size_list(n_list)?;
    if model.d != 1 {
        return Err(Error::Unsupported(
            "empirical-measure rate needs scalar minor states".into(),
        ));
    }
    if n_ref_factor == 0 {
        return Err(Error::InvalidArgument("reference factor must be >= 1".into()));
    }
    let n_max = *n_list.last().unwrap();
    let n_ref = n_ref_factor * n_max;
    let grid = *ric.grid();
    let dy = Dynamics::new(model, ric, &grid)?;
    let noise = NoiseSource::new(seed);

    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut lim = LimitStepper::new(&dy, noise, path, n_ref);
            let mut sups = vec![0.0f64; n_list.len()];
            let mut full = vec![0.0; n_ref];
            let mut prefix = vec![0.0; n_max];
            for _ in 0..grid.n_steps() {
                lim.step();
                full.copy_from_slice(&lim.minors);
                full.sort_by(f64::total_cmp);
                for (idx, &n) in n_list.iter().enumerate() {
                    let pref = &mut prefix[..n];
                    pref.copy_from_slice(&lim.minors[..n]);
                    pref.sort_by(f64::total_cmp);
                    let w2sq = w2_squared_sorted_quantile(pref, &full);
                    if w2sq > sups[idx] {
                        sups[idx] = w2sq;
                    }
                }
            }
            sups
        })
        .collect();

    let mut points = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let samples: Vec<f64> = per_path.iter().map(|s| s[idx]).collect();
        points.push(MeasureRatePoint {
            n,
            w2_squared: mean_stderr(&samples),
        });
    }
    let fit = fit_rate(
        n_list,
        &points.iter().map(|p| p.w2_squared.mean).collect::<Vec<_>>(),
    )?;
    Ok(MeasureRateReport { n_ref, points, fit })
}

/// A named unilateral control replacement.
#[derive(Clone, Debug)]
pub struct LabeledDeviation {
    pub label: String,
    pub deviation: Deviation,
}

/// The default parametric families: scaled gains and constant shifts for
/// the major player and for minor player 1.
pub fn default_deviation_family(include_major: bool, include_minor: bool) -> Vec<LabeledDeviation> {
    let scales = [0.0, 0.5, 0.8, 1.0, 1.2, 1.5, 2.0];
    let shifts = [0.5, -0.5, 1.0, -1.0];
    let mut out = Vec::new();
    if include_major {
        for s in scales {
            out.push(LabeledDeviation {
                label: format!("major_scale_{s}"),
                deviation: Deviation {
                    player: Player::Major,
                    tweak: ControlTweak::Scale(s),
                },
            });
        }
        for s in shifts {
            out.push(LabeledDeviation {
                label: format!("major_shift_{s}"),
                deviation: Deviation {
                    player: Player::Major,
                    tweak: ControlTweak::Shift(s),
                },
            });
        }
    }
    if include_minor {
        for s in scales {
            out.push(LabeledDeviation {
                label: format!("minor_scale_{s}"),
                deviation: Deviation {
                    player: Player::FirstMinor,
                    tweak: ControlTweak::Scale(s),
                },
            });
        }
        for s in shifts {
            out.push(LabeledDeviation {
                label: format!("minor_shift_{s}"),
                deviation: Deviation {
                    player: Player::FirstMinor,
                    tweak: ControlTweak::Shift(s),
                },
            });
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct DeviationOutcome {
    pub label: String,
    pub player: Player,
    pub cost: MeanStderr,
    /// Baseline cost of the deviating player minus the deviated cost;
    /// positive means the deviation was profitable.
    pub gain: f64,
    /// Empirical `E int |u|^p dt` of the deviated control with the player's
    /// admissibility exponent.
    pub moment: f64,
    pub admissible: bool,
}

#[derive(Clone, Debug)]
pub struct NashReport {
    pub n_minors: usize,
    pub kappa: f64,
    pub equilibrium_cost_major: MeanStderr,
    pub equilibrium_cost_minor: MeanStderr,
    pub major_moment: f64,
    pub minor_moment: f64,
    pub deviations: Vec<DeviationOutcome>,
    /// Largest gain over admissible deviations (negative when nothing
    /// profits).
    pub max_gain: f64,
}

/// Measure the cost change of each unilateral deviation against the
/// equilibrium baseline, on identical noise streams. Deviations whose
/// empirical moment exceeds the admissibility budget are excluded from the
/// headline gain and flagged.
pub fn nash_gap_experiment(
    model: &LqgModel,
    ric: &RiccatiSolution,
    n_minors: usize,
    deviations: &[LabeledDeviation],
    kappa: Option<f64>,
    n_paths: usize,
    seed: u64,
) -> Result<NashReport> {
    if deviations.is_empty() {
        return Err(Error::InvalidArgument("deviation family is empty".into()));
    }
    let grid = *ric.grid();
    let noise = NoiseSource::new(seed);
    let record = Record {
        minors: MinorRecord::First(1),
        adjoints: false,
        controls: true,
    };
    let p_major = (model.d + 5) as f64;
    let p_minor = 2.0;

    let baseline =
        simulate_finite_game_deviated(model, ric, n_minors, &grid, noise, n_paths, record, None)?;
    let base_costs = estimate_costs(&baseline, model)?;
    let base_ctl = baseline.controls.as_ref().expect("controls recorded");
    let major_moment = control_moment(&base_ctl.u0, &grid, n_paths, p_major).mean;
    let minor_moment = control_moment(&base_ctl.minors[0], &grid, n_paths, p_minor).mean;
    // A budget tied to the equilibrium moments; the +1 keeps zero-control
    // equilibria from collapsing the admissible set to {0}.
    let kappa = kappa.unwrap_or_else(|| 10.0 * (1.0 + major_moment.max(minor_moment)));

    let mut outcomes = Vec::with_capacity(deviations.len());
    let mut max_gain = f64::NEG_INFINITY;
    for dev in deviations {
        let bundle = simulate_finite_game_deviated(
            model,
            ric,
            n_minors,
            &grid,
            noise,
            n_paths,
            record,
            Some(dev.deviation),
        )?;
        let costs = estimate_costs(&bundle, model)?;
        let ctl = bundle.controls.as_ref().expect("controls recorded");
        let (cost, base_mean, moment) = match dev.deviation.player {
            Player::Major => (
                costs.j0,
                base_costs.j0.mean,
                control_moment(&ctl.u0, &grid, n_paths, p_major).mean,
            ),
            Player::FirstMinor => (
                costs.j_minor_mean,
                base_costs.j_minor_mean.mean,
                control_moment(&ctl.minors[0], &grid, n_paths, p_minor).mean,
            ),
        };
        let admissible = moment <= kappa;
        let gain = base_mean - cost.mean;
        if admissible && gain > max_gain {
            max_gain = gain;
        }
        outcomes.push(DeviationOutcome {
            label: dev.label.clone(),
            player: dev.deviation.player,
            cost,
            gain,
            moment,
            admissible,
        });
    }
    if !max_gain.is_finite() {
        max_gain = 0.0;
    }
    Ok(NashReport {
        n_minors,
        kappa,
        equilibrium_cost_major: base_costs.j0,
        equilibrium_cost_minor: base_costs.j_minor_mean,
        major_moment,
        minor_moment,
        deviations: outcomes,
        max_gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LqgModel;
    use crate::numerics::{Matrix, TimeGrid};

    #[test]
    fn fit_rate_exact_inverse_law() {
        let sizes = [8usize, 16, 32, 64, 128];
        let errors: Vec<f64> = sizes.iter().map(|n| 1.0 / *n as f64).collect();
        let fit = fit_rate(&sizes, &errors).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rate_constant_errors() {
        let fit = fit_rate(&[4, 8, 16, 32], &[0.7, 0.7, 0.7, 0.7]).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn fit_rate_synthetic_noise() {
        let sizes: Vec<usize> = (3..12).map(|k| 1usize << k).collect();
        // N^{-2/5} with a deterministic +-5% wobble
        let errors: Vec<f64> = sizes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                (*n as f64).powf(-0.4) * (1.0 + 0.05 * if i % 2 == 0 { 1.0 } else { -1.0 })
            })
            .collect();
        let fit = fit_rate(&sizes, &errors).unwrap();
        assert!((fit.slope + 0.4).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn fit_rate_rejects_bad_input() {
        assert!(fit_rate(&[2, 4], &[1.0, 0.5]).is_err());
        assert!(fit_rate(&[2, 4, 8], &[1.0, 0.0, 0.5]).is_err());
        assert!(fit_rate(&[2, 4, 8], &[1.0, -0.5, 0.5]).is_err());
    }

    /// Fully decoupled model (no interaction terms, no minor state cost):
    /// finite and limit systems then share bit-identical dynamics.
    fn decoupled_model() -> LqgModel {
        let mut m = LqgModel::zeros(1, 1, 1, 1, 1, 1, 1.0);
        m.a0 = Matrix::col(&[-0.3]);
        m.b0 = Matrix::col(&[1.0]);
        m.d0_noise = Matrix::col(&[0.5]);
        m.a = Matrix::col(&[-0.2]);
        m.b = Matrix::col(&[1.0]);
        m.d_noise = Matrix::col(&[0.4]);
        m.q0 = Matrix::col(&[1.0]);
        m.x0_major = vec![1.0];
        m.x0_minor = vec![-0.5];
        m
    }

    #[test]
    fn chaos_errors_vanish_without_interaction() {
        let model = decoupled_model();
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let ric = crate::riccati::RiccatiSolution::solve(&model, &grid, 1e12).unwrap();
        let dy = Dynamics::new(&model, &ric, &grid).unwrap();
        let noise = NoiseSource::new(99);
        let mut fin = FiniteStepper::new(&dy, noise, 0, 4, None);
        let mut lim = LimitStepper::new(&dy, noise, 0, 4);
        for _ in 0..50 {
            fin.step();
            lim.step();
            assert_eq!(fin.x0, lim.x0);
            assert_eq!(fin.minors, lim.minors);
        }
        // rate fitting on identically-zero errors must fail loudly rather
        // than fabricate a slope
        assert!(chaos_experiment(&model, &ric, &[2, 4, 8], 5, 99, true).is_err());
    }

    // Sorted (optimal) coupling never beats the identity coupling on shared
    // streams: W2^2 <= mean particle-wise squared distance at every node.
    #[test]
    fn coupling_inequality_holds_nodewise() {
        let model = crate::model::random_model(31, 1, 1);
        let grid = TimeGrid::new(0.0, 1.0, 40).unwrap();
        let ric = crate::riccati::RiccatiSolution::solve(&model, &grid, 1e12).unwrap();
        let dy = Dynamics::new(&model, &ric, &grid).unwrap();
        let noise = NoiseSource::new(7);
        let n = 16;
        let mut fin = FiniteStepper::new(&dy, noise, 0, n, None);
        let mut lim = LimitStepper::new(&dy, noise, 0, n);
        for _ in 0..40 {
            fin.step();
            lim.step();
            let mut a = fin.minors.clone();
            let mut b = lim.minors.clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let w2sq = w2_squared_sorted(&a, &b);
            let identity = dist2(&fin.minors, &lim.minors) / n as f64;
            assert!(w2sq <= identity + 1e-15);
        }
    }

    #[test]
    fn particle_average_lln_rate() {
        let model = crate::model::random_model(17, 1, 1);
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let ric = crate::riccati::RiccatiSolution::solve(&model, &grid, 1e12).unwrap();
        let (points, fit) = particle_average_gap(&model, &ric, &[4, 16, 64, 256], 60, 11).unwrap();
        assert_eq!(points.len(), 4);
        assert!((fit.slope + 1.0).abs() < 0.35, "slope {}", fit.slope);
    }

    #[test]
    fn unit_scale_deviation_gains_exactly_zero() {
        let model = crate::model::random_model(23, 1, 1);
        let grid = TimeGrid::new(0.0, 1.0, 60).unwrap();
        let ric = crate::riccati::RiccatiSolution::solve(&model, &grid, 1e12).unwrap();
        let family = vec![
            LabeledDeviation {
                label: "major_scale_1".into(),
                deviation: Deviation {
                    player: Player::Major,
                    tweak: ControlTweak::Scale(1.0),
                },
            },
            LabeledDeviation {
                label: "minor_scale_1".into(),
                deviation: Deviation {
                    player: Player::FirstMinor,
                    tweak: ControlTweak::Scale(1.0),
                },
            },
        ];
        let report = nash_gap_experiment(&model, &ric, 8, &family, None, 20, 3).unwrap();
        for outcome in &report.deviations {
            assert_eq!(outcome.gain, 0.0, "{}", outcome.label);
            assert!(outcome.admissible);
        }
        assert_eq!(report.max_gain, 0.0);
    }

    // Doubling the path count shrinks each point's standard error by about
    // 1/sqrt(2); allow a wide window around that.
    #[test]
    fn stderr_shrinks_with_path_count() {
        let model = crate::model::random_model(29, 1, 1);
        let grid = TimeGrid::new(0.0, 1.0, 30).unwrap();
        let ric = crate::riccati::RiccatiSolution::solve(&model, &grid, 1e12).unwrap();
        let small = empirical_measure_rate(&model, &ric, &[4, 8, 16], 64, 5, 8).unwrap();
        let large = empirical_measure_rate(&model, &ric, &[4, 8, 16], 128, 5, 8).unwrap();
        for (a, b) in small.points.iter().zip(large.points.iter()) {
            let ratio = b.w2_squared.stderr / a.w2_squared.stderr;
            assert!(
                (0.35..=0.95).contains(&ratio),
                "N={}: stderr ratio {ratio}",
                a.n
            );
        }
    }

    #[test]
    fn measure_rate_errors_shrink_with_n() {
        let model = crate::model::random_model(29, 1, 1);
        let grid = TimeGrid::new(0.0, 1.0, 30).unwrap();
        let ric = crate::riccati::RiccatiSolution::solve(&model, &grid, 1e12).unwrap();
        let report = empirical_measure_rate(&model, &ric, &[4, 16, 64], 20, 5, 8).unwrap();
        assert_eq!(report.n_ref, 512);
        assert!(report.points[0].w2_squared.mean > report.points[2].w2_squared.mean);
        assert!(report.fit.slope < 0.0);
    }
}
