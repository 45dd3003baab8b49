//! Backward decoupling of the compact forward-backward system: the matrix
//! Riccati equation, the affine offset ODE, the propagator closed form with
//! its solvability scan, the minor player's gain, and the coefficients of
//! the minor offset process.
//!
//! Two independent routes produce the same `S`:
//! * backward RK4 on `S' = -(S Abb + Bhat S + S Bbb S + Ahat)`, `S(T) = 0`;
//! * the propagator formula `S_t = -(Gamma22_t)^{-1} Gamma21_t` where the
//!   Gamma blocks partition `exp(Bcal (T-t))`.
//!
//! Agreement of the two routes is the primary correctness gate for the
//! whole solver.

use crate::error::{Error, Result};
use crate::model::{AssembledSystem, LqgModel};
use crate::numerics::{
    expm, invert_checked, min_singular_value, rk4_backward, GriddedTrajectory, Matrix, TimeGrid,
};

/// Time-gridded decoupling data: `YY_t = S_t XX_t + s_t` for the conditioned
/// system, `Y_t = K_t X_t + k_t` for an individual minor player, with
/// `k_t = Phi1_t X0_t + Phi2_t Xbar_t + phi0_t`.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    pub d0: usize,
    pub d: usize,
    /// (d0+2d) x (d0+d), row blocks (P0bar, Pbar, Ybar), column blocks (X0, Xbar)
    pub s: GriddedTrajectory,
    /// (d0+2d) x 1 offset
    pub s_off: GriddedTrajectory,
    /// d x d minor gain
    pub k_gain: GriddedTrajectory,
    /// d x d0 coefficient of X0 in the minor offset
    pub phi1: GriddedTrajectory,
    /// d x d coefficient of Xbar in the minor offset
    pub phi2: GriddedTrajectory,
    /// d x 1 constant part of the minor offset
    pub phi0: GriddedTrajectory,
}

/// Result of scanning the solvability assumption over the grid.
#[derive(Clone, Copy, Debug)]
pub struct SolvabilityReport {
    pub min_singular_value: f64,
    pub worst_node: usize,
    pub worst_time: f64,
    pub satisfied: bool,
}

/// `S Abb + Bhat S + S Bbb S + Ahat`: the Riccati equation reads
/// `dS/dt + flow = 0`, so `flow` is the growth rate in time-to-go.
fn riccati_flow(sys: &AssembledSystem, s: &Matrix) -> Matrix {
    let mut rhs = s * &sys.abb;
    rhs.axpy(1.0, &(&sys.bhat * s));
    rhs.axpy(1.0, &(&(s * &sys.bbb) * s));
    rhs.axpy(1.0, &sys.ahat);
    rhs
}

/// Backward RK4 integration of the matrix Riccati equation
/// `dS/dt + S Abb + Bhat S + S Bbb S + Ahat = 0`, `S(T) = 0`.
pub fn solve_riccati_ode(sys: &AssembledSystem, grid: &TimeGrid) -> Result<GriddedTrajectory> {
    let terminal = Matrix::zeros(sys.backward_dim(), sys.forward_dim());
    rk4_backward(|_, s| riccati_flow(sys, s), &terminal, grid)
}

/// Partition `exp(Bcal (T-t))` into Gamma blocks at node `i`.
fn propagator_blocks(sys: &AssembledSystem, grid: &TimeGrid, i: usize) -> Result<(Matrix, Matrix)> {
    let nf = sys.forward_dim();
    let nb = sys.backward_dim();
    let tau = grid.t1() - grid.node(i);
    let psi = expm(&sys.bcal.scale(tau))?;
    let gamma21 = psi.block(nf, 0, nb, nf);
    let gamma22 = psi.block(nf, nf, nb, nb);
    Ok((gamma21, gamma22))
}

/// Closed-form Riccati solution through the propagator. Fails with the first
/// node at which the Gamma22 block is not safely invertible.
pub fn solve_riccati_propagator(
    sys: &AssembledSystem,
    grid: &TimeGrid,
    cond_threshold: f64,
) -> Result<GriddedTrajectory> {
    let mut values = Vec::with_capacity(grid.n_nodes());
    for i in 0..grid.n_nodes() {
        let (gamma21, gamma22) = propagator_blocks(sys, grid, i)?;
        let inv = invert_checked(&gamma22, cond_threshold).map_err(|_| {
            Error::AssumptionViolated {
                node: i,
                t: grid.node(i),
                min_sv: min_singular_value(&gamma22),
            }
        })?;
        values.push((&inv * &gamma21).scale(-1.0));
    }
    GriddedTrajectory::new(*grid, values)
}

/// Scan every node for invertibility of the Gamma22 block, reporting the
/// smallest singular value seen and where it occurred.
pub fn check_solvability(
    sys: &AssembledSystem,
    grid: &TimeGrid,
    cond_threshold: f64,
) -> Result<SolvabilityReport> {
    let mut min_sv = f64::INFINITY;
    let mut worst = 0usize;
    for i in 0..grid.n_nodes() {
        let (_, gamma22) = propagator_blocks(sys, grid, i)?;
        let sv = min_singular_value(&gamma22);
        if sv < min_sv {
            min_sv = sv;
            worst = i;
        }
    }
    Ok(SolvabilityReport {
        min_singular_value: min_sv,
        worst_node: worst,
        worst_time: grid.node(worst),
        satisfied: min_sv > 1.0 / cond_threshold,
    })
}

/// Backward RK4 for the affine offset `s' = -(Bhat + S Bbb)s - (Chat + S Cbb)`,
/// `s(T) = 0`, with `S` read from the already-computed trajectory.
pub fn solve_offset_ode(
    sys: &AssembledSystem,
    s_traj: &GriddedTrajectory,
    grid: &TimeGrid,
) -> Result<GriddedTrajectory> {
    if s_traj.grid() != grid {
        return Err(Error::GridMismatch(
            "offset ODE called with a different grid than the Riccati solution".into(),
        ));
    }
    let terminal = Matrix::zeros(sys.backward_dim(), 1);
    // ds/dt = -(Bhat + S Bbb)s - (Chat + S Cbb), so the time-to-go rate is
    // the whole right-hand side negated. Stage times can land an ulp
    // outside the grid; clamp before interpolating.
    rk4_backward(
        |t, s| {
            let t = t.clamp(grid.t0(), grid.t1());
            let s_t = s_traj.eval(t).expect("stage time within grid");
            let mut rhs = &(&sys.bhat * s) + &(&(&s_t * &sys.bbb) * s);
            rhs.axpy(1.0, &sys.chat);
            rhs.axpy(1.0, &(&s_t * &sys.cbb));
            rhs
        },
        &terminal,
        grid,
    )
}

/// Backward RK4 for the minor player's gain:
/// `K' + K A + A^T K - 1/2 K B R^{-1} B^T K + 2Q = 0`, `K(T) = 0`.
pub fn solve_minor_gain(model: &LqgModel, grid: &TimeGrid) -> Result<GriddedTrajectory> {
    model.validated()?;
    let gain = model.control_gain_minor()?; // -1/2 B R^{-1} B^T
    let at = model.a.transpose();
    let two_q = model.q.scale(2.0);
    let terminal = Matrix::zeros(model.d, model.d);
    rk4_backward(
        |_, k| {
            // dK/dt = -(K A + A^T K + K gain K + 2Q); time-to-go rate below.
            let mut rhs = k * &model.a;
            rhs.axpy(1.0, &(&at * k));
            rhs.axpy(1.0, &(&(k * &gain) * k));
            rhs.axpy(1.0, &two_q);
            rhs
        },
        &terminal,
        grid,
    )
}

/// Closed-form coefficients of the minor offset process obtained by
/// conditioning: `k = Ybar - K Xbar`, so `Phi1 = S31`, `Phi2 = S32 - K`,
/// `phi0 = s3` node by node.
pub fn minor_offset_coeffs(
    d0: usize,
    d: usize,
    s_traj: &GriddedTrajectory,
    k_traj: &GriddedTrajectory,
    s_off: &GriddedTrajectory,
) -> Result<(GriddedTrajectory, GriddedTrajectory, GriddedTrajectory)> {
    if s_traj.grid() != k_traj.grid() || s_traj.grid() != s_off.grid() {
        return Err(Error::GridMismatch(
            "S, K and s must share one grid".into(),
        ));
    }
    let n = s_traj.grid().n_nodes();
    let mut phi1 = Vec::with_capacity(n);
    let mut phi2 = Vec::with_capacity(n);
    let mut phi0 = Vec::with_capacity(n);
    for i in 0..n {
        let s = s_traj.value(i);
        phi1.push(s.block(d0 + d, 0, d, d0));
        phi2.push(&s.block(d0 + d, d0, d, d) - k_traj.value(i));
        phi0.push(s_off.value(i).block(d0 + d, 0, d, 1));
    }
    Ok((
        GriddedTrajectory::new(*s_traj.grid(), phi1)?,
        GriddedTrajectory::new(*s_traj.grid(), phi2)?,
        GriddedTrajectory::new(*s_traj.grid(), phi0)?,
    ))
}

impl RiccatiSolution {
    /// Full decoupling data with the propagator route as primary solver.
    pub fn solve(model: &LqgModel, grid: &TimeGrid, cond_threshold: f64) -> Result<Self> {
        let sys = model.assemble_compact()?;
        let s = solve_riccati_propagator(&sys, grid, cond_threshold)?;
        Self::from_s(model, &sys, grid, s)
    }

    /// Same decoupling data with the ODE route for `S` (cross-check path).
    pub fn solve_via_ode(model: &LqgModel, grid: &TimeGrid) -> Result<Self> {
        let sys = model.assemble_compact()?;
        let s = solve_riccati_ode(&sys, grid)?;
        Self::from_s(model, &sys, grid, s)
    }

    fn from_s(
        model: &LqgModel,
        sys: &AssembledSystem,
        grid: &TimeGrid,
        s: GriddedTrajectory,
    ) -> Result<Self> {
        let s_off = solve_offset_ode(sys, &s, grid)?;
        let k_gain = solve_minor_gain(model, grid)?;
        let (phi1, phi2, phi0) = minor_offset_coeffs(model.d0, model.d, &s, &k_gain, &s_off)?;
        Ok(Self {
            d0: model.d0,
            d: model.d,
            s,
            s_off,
            k_gain,
            phi1,
            phi2,
            phi0,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.s.grid()
    }

    /// S11 block at a node: d0 x d0.
    pub fn s11(&self, node: usize) -> Matrix {
        self.s.value(node).block(0, 0, self.d0, self.d0)
    }

    /// S12 block at a node: d0 x d.
    pub fn s12(&self, node: usize) -> Matrix {
        self.s.value(node).block(0, self.d0, self.d0, self.d)
    }

    /// S21 block at a node: d x d0.
    pub fn s21(&self, node: usize) -> Matrix {
        self.s.value(node).block(self.d0, 0, self.d, self.d0)
    }

    /// S22 block at a node: d x d.
    pub fn s22(&self, node: usize) -> Matrix {
        self.s.value(node).block(self.d0, self.d0, self.d, self.d)
    }

    /// S31 block at a node: d x d0.
    pub fn s31(&self, node: usize) -> Matrix {
        self.s.value(node).block(self.d0 + self.d, 0, self.d, self.d0)
    }

    /// S32 block at a node: d x d.
    pub fn s32(&self, node: usize) -> Matrix {
        self.s.value(node).block(self.d0 + self.d, self.d0, self.d, self.d)
    }

    /// Offset rows (s1, s2, s3) at a node.
    pub fn s_off_blocks(&self, node: usize) -> (Matrix, Matrix, Matrix) {
        let s = self.s_off.value(node);
        (
            s.block(0, 0, self.d0, 1),
            s.block(self.d0, 0, self.d, 1),
            s.block(self.d0 + self.d, 0, self.d, 1),
        )
    }
}

/// Max over interior nodes of the central-difference Riccati residual
/// `S' + S Abb + Bhat S + S Bbb S + Ahat`.
pub fn riccati_residual_max(sys: &AssembledSystem, s: &GriddedTrajectory) -> f64 {
    let grid = s.grid();
    let h = grid.h();
    let mut worst = 0.0f64;
    for i in 1..grid.n_steps() {
        let ds = (s.value(i + 1) - s.value(i - 1)).scale(1.0 / (2.0 * h));
        let res = &ds + &riccati_flow(sys, s.value(i));
        worst = worst.max(res.max_abs());
    }
    worst
}

/// Max over interior nodes of the central-difference offset residual
/// `s' + (Bhat + S Bbb)s + (Chat + S Cbb)`.
pub fn offset_residual_max(
    sys: &AssembledSystem,
    s: &GriddedTrajectory,
    s_off: &GriddedTrajectory,
) -> f64 {
    let grid = s.grid();
    let h = grid.h();
    let mut worst = 0.0f64;
    for i in 1..grid.n_steps() {
        let dsoff = (s_off.value(i + 1) - s_off.value(i - 1)).scale(1.0 / (2.0 * h));
        let s_i = s.value(i);
        let mut res = &dsoff + &(&sys.bhat * s_off.value(i));
        res.axpy(1.0, &(&(s_i * &sys.bbb) * s_off.value(i)));
        res.axpy(1.0, &sys.chat);
        res.axpy(1.0, &(s_i * &sys.cbb));
        worst = worst.max(res.max_abs());
    }
    worst
}

/// Max over interior nodes of the affine drift residual for the minor
/// decoupling `Y = K X + Phi1 X0 + Phi2 Xbar + phi0`: the reconstructed
/// drift of `Y` must match `-(A^T Y + 2Q X - 2Q H X0 - 2Q Hhat Xbar - 2Q eta)`
/// coefficient by coefficient in the basis `(X, X0, Xbar, 1)`.
pub fn minor_drift_residual_max(model: &LqgModel, ric: &RiccatiSolution) -> f64 {
    let grid = ric.grid();
    let h = grid.h();
    let gain = model.control_gain_minor().expect("validated model");
    let gain0 = model.control_gain_major().expect("validated model");
    let at = model.a.transpose();
    let two_q = model.q.scale(2.0);
    let two_qh = (&model.q * &model.h).scale(2.0);
    let two_qhhat = (&model.q * &model.hhat).scale(2.0);
    let two_qeta = (&model.q * &Matrix::col(&model.eta)).scale(2.0);
    let a_plus_f = &model.a + &model.f;

    let cdiff = |traj: &GriddedTrajectory, i: usize| {
        (traj.value(i + 1) - traj.value(i - 1)).scale(1.0 / (2.0 * h))
    };

    let mut worst = 0.0f64;
    for i in 1..grid.n_steps() {
        let k = ric.k_gain.value(i);
        let phi1 = ric.phi1.value(i);
        let phi2 = ric.phi2.value(i);
        let phi0 = ric.phi0.value(i);
        let (s1, _, s3) = ric.s_off_blocks(i);

        // Drift coefficient matrices of the forward states at this node.
        let a00 = &model.a0 + &(&gain0 * &ric.s11(i)); // X0 <- X0
        let a0b = &model.f0 + &(&gain0 * &ric.s12(i)); // X0 <- Xbar
        let a0c = &gain0 * &s1; // X0 <- 1
        let ab0 = &model.g + &(&gain * &ric.s31(i)); // Xbar <- X0
        let abb = &a_plus_f + &(&gain * &ric.s32(i)); // Xbar <- Xbar
        let abc = &gain * &s3; // Xbar <- 1

        // X coefficient: K' + K(A + gain K) + A^T K + 2Q
        let mut res_x = cdiff(&ric.k_gain, i);
        res_x.axpy(1.0, &(k * &(&model.a + &(&gain * k))));
        res_x.axpy(1.0, &(&at * k));
        res_x.axpy(1.0, &two_q);
        worst = worst.max(res_x.max_abs());

        // X0 coefficient: Phi1' + K(G + gain Phi1) + Phi1 a00 + Phi2 ab0
        //                 + A^T Phi1 - 2Q H
        let mut res_x0 = cdiff(&ric.phi1, i);
        res_x0.axpy(1.0, &(k * &(&model.g + &(&gain * phi1))));
        res_x0.axpy(1.0, &(phi1 * &a00));
        res_x0.axpy(1.0, &(phi2 * &ab0));
        res_x0.axpy(1.0, &(&at * phi1));
        res_x0.axpy(-1.0, &two_qh);
        worst = worst.max(res_x0.max_abs());

        // Xbar coefficient: Phi2' + K(F + gain Phi2) + Phi1 a0b + Phi2 abb
        //                   + A^T Phi2 - 2Q Hhat
        let mut res_xb = cdiff(&ric.phi2, i);
        res_xb.axpy(1.0, &(k * &(&model.f + &(&gain * phi2))));
        res_xb.axpy(1.0, &(phi1 * &a0b));
        res_xb.axpy(1.0, &(phi2 * &abb));
        res_xb.axpy(1.0, &(&at * phi2));
        res_xb.axpy(-1.0, &two_qhhat);
        worst = worst.max(res_xb.max_abs());

        // Constant: phi0' + K gain phi0 + Phi1 a0c + Phi2 abc + A^T phi0 - 2Q eta
        let mut res_c = cdiff(&ric.phi0, i);
        res_c.axpy(1.0, &(&(k * &gain) * phi0));
        res_c.axpy(1.0, &(phi1 * &a0c));
        res_c.axpy(1.0, &(phi2 * &abc));
        res_c.axpy(1.0, &(&at * phi0));
        res_c.axpy(-1.0, &two_qeta);
        worst = worst.max(res_c.max_abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_model;

    fn unit_grid(n: usize) -> TimeGrid {
        TimeGrid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn zero_state_cost_keeps_s_at_zero() {
        // With Ahat = 0 the zero matrix is a fixed point of the backward flow.
        let sys = AssembledSystem::from_blocks(
            1,
            1,
            Matrix::from_rows(&[&[0.3, -0.2], &[0.1, 0.4]]).unwrap(),
            Matrix::zeros(2, 3),
            Matrix::zeros(3, 2),
            Matrix::from_rows(&[&[0.3, 0.1, 0.0], &[-0.2, 0.4, 0.0], &[0.0, 0.0, 0.5]]).unwrap(),
        );
        let s = solve_riccati_ode(&sys, &unit_grid(50)).unwrap();
        for i in 0..=50 {
            assert_eq!(s.value(i).max_abs(), 0.0);
        }
    }

    // Scalar reduction (d0 = 1, d = 0): S' = beta S^2 - alpha has the closed
    // form S(t) = sqrt(alpha/beta) tanh(sqrt(alpha beta)(T - t)).
    #[test]
    fn scalar_reduction_matches_tanh() {
        let (alpha, beta) = (2.0, 0.5);
        let sys = AssembledSystem::from_blocks(
            1,
            0,
            Matrix::zeros(1, 1),
            Matrix::col(&[-beta]),
            Matrix::col(&[alpha]),
            Matrix::zeros(1, 1),
        );
        let grid = unit_grid(1000);
        let s = solve_riccati_ode(&sys, &grid).unwrap();
        let amp = (alpha / beta).sqrt();
        let rate = (alpha * beta).sqrt();
        let mut worst = 0.0f64;
        for i in 0..=1000 {
            let want = amp * (rate * (1.0 - grid.node(i))).tanh();
            worst = worst.max((s.value(i).get(0, 0) - want).abs());
        }
        assert!(worst <= 1e-8, "worst {worst:.3e}");
    }

    #[test]
    fn propagator_trivial_cases() {
        let sys = AssembledSystem::from_blocks(
            1,
            1,
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 3),
            Matrix::zeros(3, 2),
            Matrix::zeros(3, 3),
        );
        let grid = unit_grid(10);
        let s = solve_riccati_propagator(&sys, &grid, 1e12).unwrap();
        for i in 0..=10 {
            assert_eq!(s.value(i).max_abs(), 0.0);
        }
        let report = check_solvability(&sys, &grid, 1e12).unwrap();
        assert!(report.satisfied);
        assert!((report.min_singular_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn propagator_terminal_condition_is_exact() {
        let m = random_model(5, 1, 1);
        let sys = m.assemble_compact().unwrap();
        let grid = unit_grid(20);
        let s = solve_riccati_propagator(&sys, &grid, 1e12).unwrap();
        assert_eq!(s.terminal().max_abs(), 0.0);
    }

    #[test]
    fn cross_solver_agreement_on_random_models() {
        for (seed, d0, d) in [(1u64, 1usize, 1usize), (2, 1, 2), (3, 2, 1)] {
            let m = random_model(seed, d0, d);
            let sys = m.assemble_compact().unwrap();
            let grid = unit_grid(400);
            let s_ode = solve_riccati_ode(&sys, &grid).unwrap();
            let s_prop = solve_riccati_propagator(&sys, &grid, 1e12).unwrap();
            let gap = s_ode.max_gap(&s_prop);
            assert!(gap <= 1e-6, "seed {seed}: gap {gap:.3e}");
        }
    }

    // A synthetic system whose Gamma22 determinant crosses zero inside the
    // horizon: bcal = [[0, -1], [4, 0]] gives Gamma22 = cos(2 tau), zero at
    // tau = pi/4, i.e. t = T - pi/4. The scan has to flag it and the ODE
    // route has to escape in finite time.
    #[test]
    fn solvability_scan_finds_conjugate_point() {
        let sys = AssembledSystem::from_blocks(
            1,
            0,
            Matrix::zeros(1, 1),
            Matrix::col(&[-1.0]),
            Matrix::col(&[-4.0]),
            Matrix::zeros(1, 1),
        );
        let grid = unit_grid(1000);
        let report = check_solvability(&sys, &grid, 100.0).unwrap();
        assert!(!report.satisfied, "min sv {}", report.min_singular_value);
        let t_star = 1.0 - std::f64::consts::FRAC_PI_4;
        assert!(
            (report.worst_time - t_star).abs() < 2e-3,
            "worst at {}, expected {}",
            report.worst_time,
            t_star
        );
        assert!(matches!(
            solve_riccati_ode(&sys, &grid),
            Err(Error::BlowUp { .. })
        ));
    }

    // Same conjugate-point construction but with two unequal frequencies so
    // Gamma22 becomes genuinely ill-conditioned near the crossing, which is
    // what the propagator route checks node by node.
    #[test]
    fn propagator_rejects_near_singular_gamma22() {
        let sys = AssembledSystem::from_blocks(
            2,
            0,
            Matrix::zeros(2, 2),
            Matrix::diag(&[-1.0, -1.0]),
            Matrix::diag(&[-4.0, -1.0]),
            Matrix::zeros(2, 2),
        );
        let grid = unit_grid(1000);
        match solve_riccati_propagator(&sys, &grid, 100.0) {
            Err(Error::AssumptionViolated { t, .. }) => {
                // first rejected node is the earliest scanned (t runs forward)
                assert!(t < 1.0 - std::f64::consts::FRAC_PI_4 + 0.05, "t = {t}");
            }
            other => panic!("expected solvability violation, got {other:?}"),
        }
        let report = check_solvability(&sys, &grid, 100.0).unwrap();
        assert!(!report.satisfied);
    }

    #[test]
    fn offset_vanishes_without_affine_targets() {
        let mut m = random_model(9, 1, 1);
        m.eta0 = vec![0.0];
        m.eta = vec![0.0];
        let sys = m.assemble_compact().unwrap();
        let grid = unit_grid(100);
        let s = solve_riccati_propagator(&sys, &grid, 1e12).unwrap();
        let s_off = solve_offset_ode(&sys, &s, &grid).unwrap();
        for i in 0..=100 {
            assert_eq!(s_off.value(i).max_abs(), 0.0);
        }
    }

    // With Ahat = 0 (so S = 0) the offset obeys s' = -Bhat s - Chat, a
    // constant-coefficient linear ODE with closed form for scalar blocks.
    #[test]
    fn offset_matches_scalar_closed_form() {
        let beta = 0.7;
        let gamma = 1.3;
        let sys = {
            let mut s = AssembledSystem::from_blocks(
                1,
                0,
                Matrix::zeros(1, 1),
                Matrix::col(&[-0.4]),
                Matrix::zeros(1, 1),
                Matrix::col(&[beta]),
            );
            s.chat = Matrix::col(&[gamma]);
            s
        };
        let grid = unit_grid(1000);
        let s = solve_riccati_ode(&sys, &grid).unwrap();
        let s_off = solve_offset_ode(&sys, &s, &grid).unwrap();
        // s' = -beta s - gamma, s(T) = 0  =>  s(t) = (gamma/beta)(e^{beta(T-t)} - 1)
        let mut worst = 0.0f64;
        for i in 0..=1000 {
            let tau = 1.0 - grid.node(i);
            let want = gamma / beta * ((beta * tau).exp() - 1.0);
            worst = worst.max((s_off.value(i).get(0, 0) - want).abs());
        }
        assert!(worst <= 1e-8, "worst {worst:.3e}");
    }

    #[test]
    fn minor_gain_zero_cost() {
        let mut m = random_model(4, 1, 2);
        m.q = Matrix::zeros(2, 2);
        let k = solve_minor_gain(&m, &unit_grid(50)).unwrap();
        for i in 0..=50 {
            assert_eq!(k.value(i).max_abs(), 0.0);
        }
    }

    // A = 0, B = 1, R = 1, Q = 1/2:  K' - K^2/2 + 1 = 0, K(T) = 0 gives
    // K(t) = sqrt(2) tanh((T - t)/sqrt(2)).
    #[test]
    fn minor_gain_scalar_closed_form() {
        let mut m = LqgModel::zeros(1, 1, 1, 1, 1, 1, 1.0);
        m.b = Matrix::col(&[1.0]);
        m.q = Matrix::col(&[0.5]);
        let grid = unit_grid(1000);
        let k = solve_minor_gain(&m, &grid).unwrap();
        let rt2 = 2.0f64.sqrt();
        let mut worst = 0.0f64;
        for i in 0..=1000 {
            let want = rt2 * ((1.0 - grid.node(i)) / rt2).tanh();
            worst = worst.max((k.value(i).get(0, 0) - want).abs());
        }
        assert!(worst <= 1e-8, "worst {worst:.3e}");
    }

    #[test]
    fn offset_coeffs_terminal_and_zero_gain() {
        let m = random_model(13, 1, 1);
        let grid = unit_grid(200);
        let ric = RiccatiSolution::solve(&m, &grid, 1e12).unwrap();
        let n = grid.n_steps();
        assert_eq!(ric.phi1.value(n).max_abs(), 0.0);
        assert_eq!(ric.phi2.value(n).max_abs(), 0.0);
        assert_eq!(ric.phi0.value(n).max_abs(), 0.0);

        // With K = 0, Phi2 reduces to the S32 block.
        let zero_k = GriddedTrajectory::constant(grid, Matrix::zeros(1, 1));
        let (_, phi2, _) =
            minor_offset_coeffs(1, 1, &ric.s, &zero_k, &ric.s_off).unwrap();
        for i in 0..=n {
            assert_eq!(phi2.value(i), &ric.s32(i));
        }
    }

    #[test]
    fn offset_coeffs_reject_grid_mismatch() {
        let m = random_model(13, 1, 1);
        let ric = RiccatiSolution::solve(&m, &unit_grid(100), 1e12).unwrap();
        let other = GriddedTrajectory::constant(unit_grid(50), Matrix::zeros(1, 1));
        assert!(matches!(
            minor_offset_coeffs(1, 1, &ric.s, &other, &ric.s_off),
            Err(Error::GridMismatch(_))
        ));
    }

    // Index-mapping check for the feedback blocks: mark every entry of a fake
    // S with row*10 + col and make sure each accessor extracts the right
    // sub-matrix for an asymmetric (d0 = 1, d = 2) layout.
    #[test]
    fn block_accessors_pick_the_right_entries() {
        let (d0, d) = (1usize, 2usize);
        let grid = unit_grid(2);
        let mut marker = Matrix::zeros(d0 + 2 * d, d0 + d);
        for i in 0..d0 + 2 * d {
            for j in 0..d0 + d {
                marker.set(i, j, (i * 10 + j) as f64);
            }
        }
        let ric = RiccatiSolution {
            d0,
            d,
            s: GriddedTrajectory::constant(grid, marker),
            s_off: GriddedTrajectory::constant(grid, Matrix::zeros(d0 + 2 * d, 1)),
            k_gain: GriddedTrajectory::constant(grid, Matrix::zeros(d, d)),
            phi1: GriddedTrajectory::constant(grid, Matrix::zeros(d, d0)),
            phi2: GriddedTrajectory::constant(grid, Matrix::zeros(d, d)),
            phi0: GriddedTrajectory::constant(grid, Matrix::zeros(d, 1)),
        };
        assert_eq!(ric.s11(0), Matrix::col(&[0.0]));
        assert_eq!(ric.s12(0), Matrix::from_rows(&[&[1.0, 2.0]]).unwrap());
        assert_eq!(
            ric.s21(0),
            Matrix::from_rows(&[&[10.0], &[20.0]]).unwrap()
        );
        assert_eq!(
            ric.s31(0),
            Matrix::from_rows(&[&[30.0], &[40.0]]).unwrap()
        );
        assert_eq!(
            ric.s32(0),
            Matrix::from_rows(&[&[31.0, 32.0], &[41.0, 42.0]]).unwrap()
        );
    }

    #[test]
    fn residuals_are_small_for_random_models() {
        for (seed, d0, d) in [(21u64, 1usize, 1usize), (22, 1, 2)] {
            let m = random_model(seed, d0, d);
            let sys = m.assemble_compact().unwrap();
            let grid = unit_grid(1000);
            let ric = RiccatiSolution::solve(&m, &grid, 1e12).unwrap();
            let h = grid.h();
            let r1 = riccati_residual_max(&sys, &ric.s);
            let r2 = offset_residual_max(&sys, &ric.s, &ric.s_off);
            let r3 = minor_drift_residual_max(&m, &ric);
            assert!(r1 <= 10.0 * h * h, "seed {seed}: riccati residual {r1:.3e}");
            assert!(r2 <= 10.0 * h * h, "seed {seed}: offset residual {r2:.3e}");
            assert!(r3 <= 1e-6, "seed {seed}: minor drift residual {r3:.3e}");
        }
    }
}
