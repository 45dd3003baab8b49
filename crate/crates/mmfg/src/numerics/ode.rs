//! Backward fixed-grid Runge-Kutta integration for the Riccati and offset
//! equations. Blow-up (any non-finite entry) aborts with the first failing
//! node; Riccati finite-time escape is the expected failure mode upstream.

use super::grid::{GriddedTrajectory, TimeGrid};
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Integrate a terminal-value problem backward from `grid.t1` (where
/// `V = terminal` exactly) down to `grid.t0` with classical fourth-order
/// Runge-Kutta, storing the value at every node.
///
/// `f(t, V)` is the growth rate in the time-to-go variable `s = T - t`:
/// the integrator solves `dV/ds = f(t(s), V)`, equivalently
/// `dV/dt = -f(t, V)`. A backward sweep of `V' + g(V) = 0` therefore
/// passes `f = g` directly.
pub fn rk4_backward<F>(f: F, terminal: &Matrix, grid: &TimeGrid) -> Result<GriddedTrajectory>
where
    F: Fn(f64, &Matrix) -> Matrix,
{
    let n = grid.n_steps();
    let h = grid.h();
    let mut values = vec![Matrix::zeros(0, 0); grid.n_nodes()];
    values[n] = terminal.clone();
    let mut v = terminal.clone();
    for k in (0..n).rev() {
        let t = grid.node(k + 1);
        let k1 = f(t, &v);
        let mut v2 = v.clone();
        v2.axpy(0.5 * h, &k1);
        let k2 = f(t - 0.5 * h, &v2);
        let mut v3 = v.clone();
        v3.axpy(0.5 * h, &k2);
        let k3 = f(t - 0.5 * h, &v3);
        let mut v4 = v.clone();
        v4.axpy(h, &k3);
        let k4 = f(t - h, &v4);
        let mut step = k1;
        step.axpy(2.0, &k2);
        step.axpy(2.0, &k3);
        step.axpy(1.0, &k4);
        v.axpy(h / 6.0, &step);
        if !v.all_finite() {
            return Err(Error::BlowUp {
                node: k,
                t: grid.node(k),
            });
        }
        values[k] = v.clone();
    }
    GriddedTrajectory::new(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_keeps_terminal() {
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let c = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let traj = rk4_backward(|_, _| Matrix::zeros(2, 2), &c, &g).unwrap();
        for k in 0..=10 {
            assert_eq!(traj.value(k), &c);
        }
    }

    // dV/dt = -V, V(1) = 1 has V(t) = e^{t-1}.
    #[test]
    fn scalar_linear_matches_exponential() {
        let g = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let traj = rk4_backward(|_, v| v.scale(-1.0), &Matrix::col(&[1.0]), &g).unwrap();
        let h = g.h();
        let mut worst = 0.0f64;
        for k in 0..=100 {
            let want = (g.node(k) - 1.0).exp();
            worst = worst.max((traj.value(k).get(0, 0) - want).abs());
        }
        assert!(worst <= 10.0 * h.powi(4), "worst error {worst:.3e}");
    }

    // dV/dt = -V^2 + 1, V(1) = 0 has V(t) = tanh(1 - t).
    #[test]
    fn scalar_riccati_matches_tanh() {
        let g = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let f = |_: f64, v: &Matrix| {
            let x = v.get(0, 0);
            Matrix::col(&[-x * x + 1.0])
        };
        let traj = rk4_backward(f, &Matrix::col(&[0.0]), &g).unwrap();
        let mut worst = 0.0f64;
        for k in 0..=1000 {
            let want = (1.0 - g.node(k)).tanh();
            worst = worst.max((traj.value(k).get(0, 0) - want).abs());
        }
        assert!(worst <= 1e-8, "worst error {worst:.3e}");
    }

    // Interpolating the tanh trajectory off-node stays within h^2.
    #[test]
    fn interp_error_within_h_squared() {
        let g = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let f = |_: f64, v: &Matrix| {
            let x = v.get(0, 0);
            Matrix::col(&[-x * x + 1.0])
        };
        let traj = rk4_backward(f, &Matrix::col(&[0.0]), &g).unwrap();
        let h = g.h();
        for m in 0..40 {
            let t = 0.0123 + m as f64 * 0.0241;
            let got = traj.eval(t).unwrap().get(0, 0);
            assert!(((1.0 - t).tanh() - got).abs() <= h * h);
        }
    }

    // Matrix linear field dV/dt = A V matches expm(A(t-T)) * terminal.
    #[test]
    fn matrix_linear_matches_propagator() {
        use crate::numerics::linalg::expm;
        let a = Matrix::from_rows(&[&[0.2, 1.0], &[-0.6, 0.1]]).unwrap();
        let term = Matrix::col(&[1.0, -2.0]);
        let g = TimeGrid::new(0.0, 1.0, 200).unwrap();
        let traj = rk4_backward(|_, v| &a * v, &term, &g).unwrap();
        let h = g.h();
        let mut worst = 0.0f64;
        for k in 0..=200 {
            let want = &expm(&a.scale(1.0 - g.node(k))).unwrap() * &term;
            worst = worst.max((traj.value(k) - &want).max_abs());
        }
        assert!(worst <= 20.0 * h.powi(4), "worst error {worst:.3e}");
    }

    #[test]
    fn blow_up_reports_first_failing_node() {
        // f = -V^2 with V(T) = -1.5 escapes to -infinity at time-to-go 2/3,
        // i.e. at t = T - 2/3.
        let g = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let f = |_: f64, v: &Matrix| {
            let x = v.get(0, 0);
            Matrix::col(&[-x * x])
        };
        let err = rk4_backward(f, &Matrix::col(&[-1.5]), &g).unwrap_err();
        match err {
            Error::BlowUp { t, .. } => assert!(t < 1.0 - 0.5, "blow-up at t = {t}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
