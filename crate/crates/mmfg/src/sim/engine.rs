//! Euler-Maruyama engines for the conditioned-mean system, the finite
//! (N+1)-player game under the equilibrium feedback, and the limiting
//! particle system with conditionally independent minors.
//!
//! All three share one set of per-node coefficient tables ([`Dynamics`]) and
//! one counter-based noise source, so trajectories of coupled systems can be
//! compared path by path and, in fully decoupled configurations, coincide
//! bit for bit. Paths are embarrassingly parallel; reductions happen in
//! fixed path order afterwards, so results do not depend on the worker
//! count.
//!
//! The step uses the Riccati grid's own step size: every coefficient is
//! affine, so the weak error is far below the Monte Carlo noise at the
//! default resolutions.

use super::bundle::{Adjoints, Controls, MinorRecord, PathBundle, Record, Series};
use super::noise::NoiseSource;
use crate::error::{Error, Result};
use crate::model::LqgModel;
use crate::numerics::{Matrix, TimeGrid};
use crate::riccati::RiccatiSolution;
use rayon::prelude::*;

/// `acc += M x`
#[inline]
pub(crate) fn gemv_acc(acc: &mut [f64], m: &Matrix, x: &[f64]) {
    let (rows, cols) = m.shape();
    debug_assert_eq!(acc.len(), rows);
    debug_assert_eq!(x.len(), cols);
    let data = m.as_slice();
    for i in 0..rows {
        let row = &data[i * cols..(i + 1) * cols];
        let mut s = 0.0;
        for j in 0..cols {
            s += row[j] * x[j];
        }
        acc[i] += s;
    }
}

/// `acc += column`
#[inline]
fn add_col(acc: &mut [f64], m: &Matrix) {
    debug_assert_eq!(m.cols(), 1);
    for (a, v) in acc.iter_mut().zip(m.as_slice()) {
        *a += v;
    }
}

/// Multiplicative or additive tweak of one player's control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ControlTweak {
    /// `u -> lambda u`
    Scale(f64),
    /// `u -> u + delta` on every component
    Shift(f64),
}

impl ControlTweak {
    #[inline]
    pub fn apply(&self, u: &mut [f64]) {
        match self {
            ControlTweak::Scale(lambda) => u.iter_mut().for_each(|v| *v *= lambda),
            ControlTweak::Shift(delta) => u.iter_mut().for_each(|v| *v += delta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Player {
    Major,
    /// The minor player with index 1 (particle slot 0).
    FirstMinor,
}

/// A unilateral replacement of one player's control in the finite game.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deviation {
    pub player: Player,
    pub tweak: ControlTweak,
}

/// Per-node affine coefficient tables derived from a model and its Riccati
/// decoupling. Everything the steppers touch per step lives here.
pub struct Dynamics {
    pub d0: usize,
    pub d: usize,
    pub k0: usize,
    pub k: usize,
    pub m0: usize,
    pub m: usize,
    pub grid: TimeGrid,
    h: f64,
    sqrt_h: f64,

    // raw model pieces used by the explicit control path and the costs
    a0: Matrix,
    b0_ctl: Matrix,
    f0: Matrix,
    d0_noise: Matrix,
    a: Matrix,
    b_ctl: Matrix,
    f: Matrix,
    g: Matrix,
    d_noise: Matrix,
    q0: Matrix,
    r0: Matrix,
    h0: Matrix,
    eta0: Vec<f64>,
    q: Matrix,
    r: Matrix,
    h_tgt: Matrix,
    hhat: Matrix,
    eta: Vec<f64>,
    pub x0_major: Vec<f64>,
    pub x0_minor: Vec<f64>,

    // feedback coefficient tables (per node)
    g0_x0: Vec<Matrix>,
    g0_xb: Vec<Matrix>,
    g0_c: Vec<Matrix>,
    gi_xi: Vec<Matrix>,
    gi_x0: Vec<Matrix>,
    gi_xb: Vec<Matrix>,
    gi_c: Vec<Matrix>,

    // fused drift tables for non-deviating minors
    mii: Vec<Matrix>,
    mi0: Vec<Matrix>,
    mib: Vec<Matrix>,
    mic: Vec<Matrix>,

    // exact conditional-mean flow
    mb0: Vec<Matrix>,
    mbb: Vec<Matrix>,
    mbc: Vec<Matrix>,

    // decoupling blocks for adjoint reconstruction
    s11: Vec<Matrix>,
    s12: Vec<Matrix>,
    s21: Vec<Matrix>,
    s22: Vec<Matrix>,
    s31: Vec<Matrix>,
    s32: Vec<Matrix>,
    s1: Vec<Matrix>,
    s2: Vec<Matrix>,
    s3: Vec<Matrix>,
}

impl Dynamics {
    pub fn new(model: &LqgModel, ric: &RiccatiSolution, grid: &TimeGrid) -> Result<Self> {
        model.validated()?;
        if ric.grid() != grid {
            return Err(Error::GridMismatch(
                "simulation grid differs from the Riccati grid".into(),
            ));
        }
        if ric.d0 != model.d0 || ric.d != model.d {
            return Err(Error::MissingData(
                "Riccati solution dimensions do not match the model".into(),
            ));
        }
        let n_nodes = grid.n_nodes();
        let r0_inv = crate::numerics::invert_checked(&model.r0, 1e14)?;
        let r_inv = crate::numerics::invert_checked(&model.r, 1e14)?;
        // -1/2 R0^{-1} B0^T and -1/2 R^{-1} B^T map adjoint values to controls
        let nh0 = (&r0_inv * &model.b0.transpose()).scale(-0.5);
        let nh = (&r_inv * &model.b.transpose()).scale(-0.5);
        // -1/2 B R^{-1} B^T closes the loop in the state equation
        let gain_minor = model.control_gain_minor()?;
        let a_plus_f = &model.a + &model.f;

        let mut g0_x0 = Vec::with_capacity(n_nodes);
        let mut g0_xb = Vec::with_capacity(n_nodes);
        let mut g0_c = Vec::with_capacity(n_nodes);
        let mut gi_xi = Vec::with_capacity(n_nodes);
        let mut gi_x0 = Vec::with_capacity(n_nodes);
        let mut gi_xb = Vec::with_capacity(n_nodes);
        let mut gi_c = Vec::with_capacity(n_nodes);
        let mut mii = Vec::with_capacity(n_nodes);
        let mut mi0 = Vec::with_capacity(n_nodes);
        let mut mib = Vec::with_capacity(n_nodes);
        let mut mic = Vec::with_capacity(n_nodes);
        let mut mb0 = Vec::with_capacity(n_nodes);
        let mut mbb = Vec::with_capacity(n_nodes);
        let mut mbc = Vec::with_capacity(n_nodes);
        let mut s11 = Vec::with_capacity(n_nodes);
        let mut s12 = Vec::with_capacity(n_nodes);
        let mut s21 = Vec::with_capacity(n_nodes);
        let mut s22 = Vec::with_capacity(n_nodes);
        let mut s31 = Vec::with_capacity(n_nodes);
        let mut s32 = Vec::with_capacity(n_nodes);
        let mut s1 = Vec::with_capacity(n_nodes);
        let mut s2 = Vec::with_capacity(n_nodes);
        let mut s3 = Vec::with_capacity(n_nodes);

        for i in 0..n_nodes {
            let (s1_i, s2_i, s3_i) = ric.s_off_blocks(i);
            let s11_i = ric.s11(i);
            let s12_i = ric.s12(i);
            let s31_i = ric.s31(i);
            let s32_i = ric.s32(i);

            g0_x0.push(&nh0 * &s11_i);
            g0_xb.push(&nh0 * &s12_i);
            g0_c.push(&nh0 * &s1_i);

            gi_xi.push(&nh * ric.k_gain.value(i));
            gi_x0.push(&nh * ric.phi1.value(i));
            gi_xb.push(&nh * ric.phi2.value(i));
            gi_c.push(&nh * ric.phi0.value(i));

            mii.push(&model.a + &(&model.b * gi_xi.last().unwrap()));
            mi0.push(&model.g + &(&model.b * gi_x0.last().unwrap()));
            mib.push(&model.f + &(&model.b * gi_xb.last().unwrap()));
            mic.push(&model.b * gi_c.last().unwrap());

            mb0.push(&model.g + &(&gain_minor * &s31_i));
            mbb.push(&a_plus_f + &(&gain_minor * &s32_i));
            mbc.push(&gain_minor * &s3_i);

            s11.push(s11_i);
            s12.push(s12_i);
            s21.push(ric.s21(i));
            s22.push(ric.s22(i));
            s31.push(s31_i);
            s32.push(s32_i);
            s1.push(s1_i);
            s2.push(s2_i);
            s3.push(s3_i);
        }

        Ok(Self {
            d0: model.d0,
            d: model.d,
            k0: model.k0,
            k: model.k,
            m0: model.m0,
            m: model.m,
            grid: *grid,
            h: grid.h(),
            sqrt_h: grid.h().sqrt(),
            a0: model.a0.clone(),
            b0_ctl: model.b0.clone(),
            f0: model.f0.clone(),
            d0_noise: model.d0_noise.clone(),
            a: model.a.clone(),
            b_ctl: model.b.clone(),
            f: model.f.clone(),
            g: model.g.clone(),
            d_noise: model.d_noise.clone(),
            q0: model.q0.clone(),
            r0: model.r0.clone(),
            h0: model.h0.clone(),
            eta0: model.eta0.clone(),
            q: model.q.clone(),
            r: model.r.clone(),
            h_tgt: model.h.clone(),
            hhat: model.hhat.clone(),
            eta: model.eta.clone(),
            x0_major: model.x0_major.clone(),
            x0_minor: model.x0_minor.clone(),
            g0_x0,
            g0_xb,
            g0_c,
            gi_xi,
            gi_x0,
            gi_xb,
            gi_c,
            mii,
            mi0,
            mib,
            mic,
            mb0,
            mbb,
            mbc,
            s11,
            s12,
            s21,
            s22,
            s31,
            s32,
            s1,
            s2,
            s3,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Equilibrium major control at node `k`:
    /// `u0 = -1/2 R0^{-1} B0^T (S11 x0 + S12 xbar + s1)`.
    #[inline]
    pub fn control_major(&self, k: usize, x0: &[f64], xbar: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        gemv_acc(out, &self.g0_x0[k], x0);
        gemv_acc(out, &self.g0_xb[k], xbar);
        add_col(out, &self.g0_c[k]);
    }

    /// Equilibrium minor control at node `k`:
    /// `ui = -1/2 R^{-1} B^T (K xi + Phi1 x0 + Phi2 xbar + phi0)`.
    #[inline]
    pub fn control_minor(&self, k: usize, xi: &[f64], x0: &[f64], xbar: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        gemv_acc(out, &self.gi_xi[k], xi);
        gemv_acc(out, &self.gi_x0[k], x0);
        gemv_acc(out, &self.gi_xb[k], xbar);
        add_col(out, &self.gi_c[k]);
    }

    /// Reconstructed adjoints `(P0bar, Pbar, Ybar)` at node `k`.
    pub fn adjoints(&self, k: usize, x0: &[f64], xbar: &[f64], p0: &mut [f64], p: &mut [f64], y: &mut [f64]) {
        p0.fill(0.0);
        gemv_acc(p0, &self.s11[k], x0);
        gemv_acc(p0, &self.s12[k], xbar);
        add_col(p0, &self.s1[k]);
        p.fill(0.0);
        gemv_acc(p, &self.s21[k], x0);
        gemv_acc(p, &self.s22[k], xbar);
        add_col(p, &self.s2[k]);
        y.fill(0.0);
        gemv_acc(y, &self.s31[k], x0);
        gemv_acc(y, &self.s32[k], xbar);
        add_col(y, &self.s3[k]);
    }

    /// Major running cost `(x0 - H0 xbar - eta0)' Q0 (...) + u0' R0 u0`.
    pub fn major_cost_integrand(&self, x0: &[f64], xbar: &[f64], u0: &[f64]) -> f64 {
        let mut e = x0.to_vec();
        gemv_acc(&mut e, &self.h0.scale(-1.0), xbar);
        for (ei, t) in e.iter_mut().zip(self.eta0.iter()) {
            *ei -= t;
        }
        quad_form(&self.q0, &e) + quad_form(&self.r0, u0)
    }

    /// Minor running cost `(xi - H x0 - Hhat xbar - eta)' Q (...) + ui' R ui`.
    pub fn minor_cost_integrand(&self, xi: &[f64], x0: &[f64], xbar: &[f64], ui: &[f64]) -> f64 {
        let mut e = xi.to_vec();
        gemv_acc(&mut e, &self.h_tgt.scale(-1.0), x0);
        gemv_acc(&mut e, &self.hhat.scale(-1.0), xbar);
        for (ei, t) in e.iter_mut().zip(self.eta.iter()) {
            *ei -= t;
        }
        quad_form(&self.q, &e) + quad_form(&self.r, ui)
    }
}

/// `x' M x` for symmetric `M`.
#[inline]
pub(crate) fn quad_form(m: &Matrix, x: &[f64]) -> f64 {
    let n = m.rows();
    let data = m.as_slice();
    let mut total = 0.0;
    for i in 0..n {
        let row = &data[i * n..(i + 1) * n];
        let mut s = 0.0;
        for j in 0..n {
            s += row[j] * x[j];
        }
        total += x[i] * s;
    }
    total
}

/// One path of the finite (N+1)-player game. The major and the first minor
/// run through the explicit control path (so a unilateral deviation, a
/// recorded control and the equilibrium share bit-identical arithmetic);
/// the remaining minors use fused drift tables.
pub struct FiniteStepper<'a> {
    dy: &'a Dynamics,
    noise: NoiseSource,
    path: usize,
    pub n_minors: usize,
    pub step_idx: usize,
    pub x0: Vec<f64>,
    /// Running empirical mean of the minors, refreshed every node.
    pub xbar: Vec<f64>,
    pub minors: Vec<f64>,
    /// Controls applied on the last step (node `step_idx - 1`).
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    deviation: Option<Deviation>,
    x0_old: Vec<f64>,
    xbar_old: Vec<f64>,
    drift: Vec<f64>,
    dw0: Vec<f64>,
    dw: Vec<f64>,
}

impl<'a> FiniteStepper<'a> {
    pub fn new(
        dy: &'a Dynamics,
        noise: NoiseSource,
        path: usize,
        n_minors: usize,
        deviation: Option<Deviation>,
    ) -> Self {
        let mut minors = Vec::with_capacity(n_minors * dy.d);
        for _ in 0..n_minors {
            minors.extend_from_slice(&dy.x0_minor);
        }
        let mut s = Self {
            dy,
            noise,
            path,
            n_minors,
            step_idx: 0,
            x0: dy.x0_major.clone(),
            xbar: vec![0.0; dy.d],
            minors,
            u0: vec![0.0; dy.k0],
            u1: vec![0.0; dy.k],
            deviation,
            x0_old: vec![0.0; dy.d0],
            xbar_old: vec![0.0; dy.d],
            drift: vec![0.0; dy.d0.max(dy.d)],
            dw0: vec![0.0; dy.m0],
            dw: vec![0.0; dy.m],
        };
        s.refresh_xbar();
        s
    }

    pub fn refresh_xbar(&mut self) {
        let d = self.dy.d;
        self.xbar.fill(0.0);
        for j in 0..self.n_minors {
            let base = j * d;
            for (o, x) in self.xbar.iter_mut().zip(&self.minors[base..base + d]) {
                *o += x;
            }
        }
        let inv = 1.0 / self.n_minors as f64;
        for v in self.xbar.iter_mut() {
            *v *= inv;
        }
    }

    /// Advance from node `step_idx` to `step_idx + 1`.
    pub fn step(&mut self) {
        let dy = self.dy;
        let k = self.step_idx;
        let h = dy.h;
        let (d0, d) = (dy.d0, dy.d);

        // controls at node k for the two explicitly handled players
        dy.control_major(k, &self.x0, &self.xbar, &mut self.u0);
        if let Some(dev) = self.deviation {
            if dev.player == Player::Major {
                dev.tweak.apply(&mut self.u0);
            }
        }
        dy.control_minor(k, &self.minors[0..d], &self.x0, &self.xbar, &mut self.u1);
        if let Some(dev) = self.deviation {
            if dev.player == Player::FirstMinor {
                dev.tweak.apply(&mut self.u1);
            }
        }

        self.x0_old.copy_from_slice(&self.x0);
        self.xbar_old.copy_from_slice(&self.xbar);

        // major: x0 += h (A0 x0 + B0 u0 + F0 xbar) + D0 dW0
        let drift0 = &mut self.drift[..d0];
        drift0.fill(0.0);
        gemv_acc(drift0, &dy.a0, &self.x0_old);
        gemv_acc(drift0, &dy.b0_ctl, &self.u0);
        gemv_acc(drift0, &dy.f0, &self.xbar_old);
        for (x, dr) in self.x0.iter_mut().zip(drift0.iter()) {
            *x += h * dr;
        }
        self.noise.increment(self.path, 0, k, dy.sqrt_h, &mut self.dw0);
        gemv_acc(&mut self.x0, &dy.d0_noise, &self.dw0);

        // first minor, explicit: xi += h (A xi + B u1 + F xbar + G x0) + D dW1
        {
            let drift = &mut self.drift[..d];
            drift.fill(0.0);
            gemv_acc(drift, &dy.a, &self.minors[0..d]);
            gemv_acc(drift, &dy.b_ctl, &self.u1);
            gemv_acc(drift, &dy.f, &self.xbar_old);
            gemv_acc(drift, &dy.g, &self.x0_old);
            for (x, dr) in self.minors[0..d].iter_mut().zip(drift.iter()) {
                *x += h * dr;
            }
            self.noise.increment(self.path, 1, k, dy.sqrt_h, &mut self.dw);
            gemv_acc(&mut self.minors[0..d], &dy.d_noise, &self.dw);
        }

        // remaining minors, fused feedback
        for j in 1..self.n_minors {
            let drift = &mut self.drift[..d];
            drift.fill(0.0);
            gemv_acc(drift, &dy.mii[k], &self.minors[j * d..(j + 1) * d]);
            gemv_acc(drift, &dy.mi0[k], &self.x0_old);
            gemv_acc(drift, &dy.mib[k], &self.xbar_old);
            add_col(drift, &dy.mic[k]);
            for (x, dr) in self.minors[j * d..(j + 1) * d].iter_mut().zip(drift.iter()) {
                *x += h * dr;
            }
            self.noise.increment(self.path, j + 1, k, dy.sqrt_h, &mut self.dw);
            gemv_acc(&mut self.minors[j * d..(j + 1) * d], &dy.d_noise, &self.dw);
        }

        self.step_idx += 1;
        self.refresh_xbar();
    }
}

/// One path of the limiting system: the major state, the exact conditional
/// mean (an ODE driven by the major path) and `n_particles` conditionally
/// independent minors whose drift reads the exact mean. Streams are shared
/// with the finite game for pathwise coupling.
pub struct LimitStepper<'a> {
    dy: &'a Dynamics,
    noise: NoiseSource,
    path: usize,
    pub n_particles: usize,
    pub step_idx: usize,
    pub x0: Vec<f64>,
    pub xbar: Vec<f64>,
    pub minors: Vec<f64>,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    x0_old: Vec<f64>,
    xbar_old: Vec<f64>,
    drift: Vec<f64>,
    dw0: Vec<f64>,
    dw: Vec<f64>,
}

impl<'a> LimitStepper<'a> {
    pub fn new(dy: &'a Dynamics, noise: NoiseSource, path: usize, n_particles: usize) -> Self {
        let mut minors = Vec::with_capacity(n_particles * dy.d);
        for _ in 0..n_particles {
            minors.extend_from_slice(&dy.x0_minor);
        }
        Self {
            dy,
            noise,
            path,
            n_particles,
            step_idx: 0,
            x0: dy.x0_major.clone(),
            xbar: dy.x0_minor.clone(),
            minors,
            u0: vec![0.0; dy.k0],
            u1: vec![0.0; dy.k],
            x0_old: vec![0.0; dy.d0],
            xbar_old: vec![0.0; dy.d],
            drift: vec![0.0; dy.d0.max(dy.d)],
            dw0: vec![0.0; dy.m0],
            dw: vec![0.0; dy.m],
        }
    }

    /// Average of the particle states, in fixed particle order.
    pub fn minor_average(&self, out: &mut [f64]) {
        let d = self.dy.d;
        out.fill(0.0);
        for j in 0..self.n_particles {
            let base = j * d;
            for (o, x) in out.iter_mut().zip(&self.minors[base..base + d]) {
                *o += x;
            }
        }
        let inv = 1.0 / self.n_particles as f64;
        for v in out.iter_mut() {
            *v *= inv;
        }
    }

    pub fn step(&mut self) {
        let dy = self.dy;
        let k = self.step_idx;
        let h = dy.h;
        let (d0, d) = (dy.d0, dy.d);

        dy.control_major(k, &self.x0, &self.xbar, &mut self.u0);
        if self.n_particles > 0 {
            dy.control_minor(k, &self.minors[0..d], &self.x0, &self.xbar, &mut self.u1);
        }

        self.x0_old.copy_from_slice(&self.x0);
        self.xbar_old.copy_from_slice(&self.xbar);

        // major, same explicit arithmetic as the finite stepper
        let drift0 = &mut self.drift[..d0];
        drift0.fill(0.0);
        gemv_acc(drift0, &dy.a0, &self.x0_old);
        gemv_acc(drift0, &dy.b0_ctl, &self.u0);
        gemv_acc(drift0, &dy.f0, &self.xbar_old);
        for (x, dr) in self.x0.iter_mut().zip(drift0.iter()) {
            *x += h * dr;
        }
        self.noise.increment(self.path, 0, k, dy.sqrt_h, &mut self.dw0);
        gemv_acc(&mut self.x0, &dy.d0_noise, &self.dw0);

        // exact conditional mean: xbar += h (mb0 x0 + mbb xbar + mbc)
        {
            let drift = &mut self.drift[..d];
            drift.fill(0.0);
            gemv_acc(drift, &dy.mb0[k], &self.x0_old);
            gemv_acc(drift, &dy.mbb[k], &self.xbar_old);
            add_col(drift, &dy.mbc[k]);
            for (x, dr) in self.xbar.iter_mut().zip(drift.iter()) {
                *x += h * dr;
            }
        }

        // first particle explicit, the rest fused; drifts read the exact mean
        if self.n_particles > 0 {
            let drift = &mut self.drift[..d];
            drift.fill(0.0);
            gemv_acc(drift, &dy.a, &self.minors[0..d]);
            gemv_acc(drift, &dy.b_ctl, &self.u1);
            gemv_acc(drift, &dy.f, &self.xbar_old);
            gemv_acc(drift, &dy.g, &self.x0_old);
            for (x, dr) in self.minors[0..d].iter_mut().zip(drift.iter()) {
                *x += h * dr;
            }
            self.noise.increment(self.path, 1, k, dy.sqrt_h, &mut self.dw);
            gemv_acc(&mut self.minors[0..d], &dy.d_noise, &self.dw);
        }
        for j in 1..self.n_particles {
            let drift = &mut self.drift[..d];
            drift.fill(0.0);
            gemv_acc(drift, &dy.mii[k], &self.minors[j * d..(j + 1) * d]);
            gemv_acc(drift, &dy.mi0[k], &self.x0_old);
            gemv_acc(drift, &dy.mib[k], &self.xbar_old);
            add_col(drift, &dy.mic[k]);
            for (x, dr) in self.minors[j * d..(j + 1) * d].iter_mut().zip(drift.iter()) {
                *x += h * dr;
            }
            self.noise.increment(self.path, j + 1, k, dy.sqrt_h, &mut self.dw);
            gemv_acc(&mut self.minors[j * d..(j + 1) * d], &dy.d_noise, &self.dw);
        }

        self.step_idx += 1;
    }
}

fn recorded_minors(minors: MinorRecord, available: usize) -> usize {
    match minors {
        MinorRecord::All => available,
        MinorRecord::First(n) => n.min(available),
        MinorRecord::None => 0,
    }
}

/// Everything one path produces under a recording policy.
struct PathData {
    major: Vec<f64>,
    cond_mean: Vec<f64>,
    minors: Vec<Vec<f64>>,
    adjoints: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    u0: Option<Vec<f64>>,
    u_minors: Vec<Vec<f64>>,
}

enum SystemKind {
    Finite(Option<Deviation>),
    Limit,
}

fn run_recorded_path(
    dy: &Dynamics,
    noise: NoiseSource,
    path: usize,
    n_minors: usize,
    kind: &SystemKind,
    record: &Record,
) -> PathData {
    let n_nodes = dy.grid.n_nodes();
    let n_rec = recorded_minors(record.minors, n_minors);
    let mut out = PathData {
        major: Vec::with_capacity(n_nodes * dy.d0),
        cond_mean: Vec::with_capacity(n_nodes * dy.d),
        minors: vec![Vec::with_capacity(n_nodes * dy.d); n_rec],
        adjoints: record.adjoints.then(|| {
            (
                Vec::with_capacity(n_nodes * dy.d0),
                Vec::with_capacity(n_nodes * dy.d),
                Vec::with_capacity(n_nodes * dy.d),
            )
        }),
        u0: record.controls.then(|| Vec::with_capacity(n_nodes * dy.k0)),
        u_minors: if record.controls {
            vec![Vec::with_capacity(n_nodes * dy.k); n_rec]
        } else {
            Vec::new()
        },
    };
    let (mut fin, mut lim) = match kind {
        SystemKind::Finite(dev) => (
            Some(FiniteStepper::new(dy, noise, path, n_minors, *dev)),
            None,
        ),
        SystemKind::Limit => (None, Some(LimitStepper::new(dy, noise, path, n_minors))),
    };

    let mut uj = vec![0.0; dy.k];
    for node in 0..n_nodes {
        let (x0, xbar, minors) = match (&fin, &lim) {
            (Some(f), _) => (&f.x0, &f.xbar, &f.minors),
            (_, Some(l)) => (&l.x0, &l.xbar, &l.minors),
            _ => unreachable!(),
        };
        out.major.extend_from_slice(x0);
        out.cond_mean.extend_from_slice(xbar);
        for j in 0..n_rec {
            out.minors[j].extend_from_slice(&minors[j * dy.d..(j + 1) * dy.d]);
        }
        if let Some((p0, p, y)) = out.adjoints.as_mut() {
            let mut b0 = vec![0.0; dy.d0];
            let mut b1 = vec![0.0; dy.d];
            let mut b2 = vec![0.0; dy.d];
            dy.adjoints(node, x0, xbar, &mut b0, &mut b1, &mut b2);
            p0.extend_from_slice(&b0);
            p.extend_from_slice(&b1);
            y.extend_from_slice(&b2);
        }
        if let Some(u0_rec) = out.u0.as_mut() {
            let mut u0 = vec![0.0; dy.k0];
            dy.control_major(node, x0, xbar, &mut u0);
            if let SystemKind::Finite(Some(dev)) = kind {
                if dev.player == Player::Major {
                    dev.tweak.apply(&mut u0);
                }
            }
            u0_rec.extend_from_slice(&u0);
            for j in 0..n_rec {
                dy.control_minor(node, &minors[j * dy.d..(j + 1) * dy.d], x0, xbar, &mut uj);
                if j == 0 {
                    if let SystemKind::Finite(Some(dev)) = kind {
                        if dev.player == Player::FirstMinor {
                            dev.tweak.apply(&mut uj);
                        }
                    }
                }
                out.u_minors[j].extend_from_slice(&uj);
            }
        }
        if node < dy.grid.n_steps() {
            if let Some(f) = fin.as_mut() {
                f.step();
            }
            if let Some(l) = lim.as_mut() {
                l.step();
            }
        }
    }
    out
}

fn bundle_from_paths(
    dy: &Dynamics,
    noise: NoiseSource,
    n_paths: usize,
    n_minors: usize,
    kind: SystemKind,
    record: Record,
) -> PathBundle {
    let n_nodes = dy.grid.n_nodes();
    let n_rec = recorded_minors(record.minors, n_minors);
    let paths: Vec<PathData> = (0..n_paths)
        .into_par_iter()
        .map(|p| run_recorded_path(dy, noise, p, n_minors, &kind, &record))
        .collect();

    let mut major = Series::zeros(n_paths, n_nodes, dy.d0);
    let mut cond_mean = Series::zeros(n_paths, n_nodes, dy.d);
    let mut minors = vec![Series::zeros(n_paths, n_nodes, dy.d); n_rec];
    let mut adjoints = record.adjoints.then(|| Adjoints {
        p0bar: Series::zeros(n_paths, n_nodes, dy.d0),
        pbar: Series::zeros(n_paths, n_nodes, dy.d),
        ybar: Series::zeros(n_paths, n_nodes, dy.d),
    });
    let mut controls = record.controls.then(|| Controls {
        u0: Series::zeros(n_paths, n_nodes, dy.k0),
        minors: vec![Series::zeros(n_paths, n_nodes, dy.k); n_rec],
    });

    for (p, data) in paths.into_iter().enumerate() {
        let maj_len = major.path_chunk_len();
        major.data[p * maj_len..(p + 1) * maj_len].copy_from_slice(&data.major);
        let cm_len = cond_mean.path_chunk_len();
        cond_mean.data[p * cm_len..(p + 1) * cm_len].copy_from_slice(&data.cond_mean);
        for (j, series) in minors.iter_mut().enumerate() {
            let len = series.path_chunk_len();
            series.data[p * len..(p + 1) * len].copy_from_slice(&data.minors[j]);
        }
        if let (Some(adj), Some((p0, pb, yb))) = (adjoints.as_mut(), data.adjoints) {
            let l0 = adj.p0bar.path_chunk_len();
            adj.p0bar.data[p * l0..(p + 1) * l0].copy_from_slice(&p0);
            let l1 = adj.pbar.path_chunk_len();
            adj.pbar.data[p * l1..(p + 1) * l1].copy_from_slice(&pb);
            adj.ybar.data[p * l1..(p + 1) * l1].copy_from_slice(&yb);
        }
        if let Some(ctl) = controls.as_mut() {
            if let Some(u0) = data.u0 {
                let l = ctl.u0.path_chunk_len();
                ctl.u0.data[p * l..(p + 1) * l].copy_from_slice(&u0);
            }
            for (j, series) in ctl.minors.iter_mut().enumerate() {
                let l = series.path_chunk_len();
                series.data[p * l..(p + 1) * l].copy_from_slice(&data.u_minors[j]);
            }
        }
    }

    PathBundle {
        grid: dy.grid,
        n_paths,
        seed: noise.seed(),
        major,
        cond_mean,
        minors,
        adjoints,
        controls,
    }
}

/// Paths of the conditioned pair `(X0, Xbar)` driven only by the common
/// noise, with adjoints reconstructed from the decoupling.
pub fn simulate_conditional_mean(
    model: &LqgModel,
    ric: &RiccatiSolution,
    grid: &TimeGrid,
    noise: NoiseSource,
    n_paths: usize,
    record: Record,
) -> Result<PathBundle> {
    let dy = Dynamics::new(model, ric, grid)?;
    Ok(bundle_from_paths(
        &dy,
        noise,
        n_paths,
        0,
        SystemKind::Limit,
        Record {
            minors: MinorRecord::None,
            ..record
        },
    ))
}

/// The finite (N+1)-player game under the equilibrium feedback profile.
pub fn simulate_finite_game(
    model: &LqgModel,
    ric: &RiccatiSolution,
    n_minors: usize,
    grid: &TimeGrid,
    noise: NoiseSource,
    n_paths: usize,
    record: Record,
) -> Result<PathBundle> {
    simulate_finite_game_deviated(model, ric, n_minors, grid, noise, n_paths, record, None)
}

/// Finite game with one player's control unilaterally replaced.
#[allow(clippy::too_many_arguments)]
pub fn simulate_finite_game_deviated(
    model: &LqgModel,
    ric: &RiccatiSolution,
    n_minors: usize,
    grid: &TimeGrid,
    noise: NoiseSource,
    n_paths: usize,
    record: Record,
    deviation: Option<Deviation>,
) -> Result<PathBundle> {
    if n_minors == 0 {
        return Err(Error::InvalidArgument(
            "finite game needs at least one minor player".into(),
        ));
    }
    let dy = Dynamics::new(model, ric, grid)?;
    Ok(bundle_from_paths(
        &dy,
        noise,
        n_paths,
        n_minors,
        SystemKind::Finite(deviation),
        record,
    ))
}

/// The limiting system: exact conditional mean plus `n_particles`
/// conditionally independent minor particles on shared streams.
pub fn simulate_limit_particles(
    model: &LqgModel,
    ric: &RiccatiSolution,
    n_particles: usize,
    grid: &TimeGrid,
    noise: NoiseSource,
    n_paths: usize,
    record: Record,
) -> Result<PathBundle> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument(
            "limit system needs at least one particle".into(),
        ));
    }
    let dy = Dynamics::new(model, ric, grid)?;
    Ok(bundle_from_paths(
        &dy,
        noise,
        n_paths,
        n_particles,
        SystemKind::Limit,
        record,
    ))
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

pub fn mean_stderr(samples: &[f64]) -> MeanStderr {
    let n = samples.len();
    if n == 0 {
        return MeanStderr {
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanStderr { mean, stderr: 0.0 };
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    MeanStderr {
        mean,
        stderr: (var / n as f64).sqrt(),
    }
}

/// Estimated running costs of a recorded bundle.
#[derive(Clone, Copy, Debug)]
pub struct CostReport {
    pub j0: MeanStderr,
    /// Mean over recorded minors of the individual minor cost.
    pub j_minor_mean: MeanStderr,
}

/// Trapezoidal time quadrature per path, Monte Carlo statistics across
/// paths. The bundle must carry recorded controls.
pub fn estimate_costs(bundle: &PathBundle, model: &LqgModel) -> Result<CostReport> {
    let controls = bundle
        .controls
        .as_ref()
        .ok_or_else(|| Error::MissingData("cost estimation needs recorded controls".into()))?;
    // Rebuild the integrand tables from the model directly; only static
    // coefficients are needed here.
    let dy_q0 = &model.q0;
    let dy_r0 = &model.r0;
    let n_nodes = bundle.n_nodes();
    let h = bundle.grid.h();
    let weight = |node: usize| {
        if node == 0 || node + 1 == n_nodes {
            0.5 * h
        } else {
            h
        }
    };

    let mut j0_samples = Vec::with_capacity(bundle.n_paths);
    let mut jm_samples = Vec::with_capacity(bundle.n_paths);
    let have_minors = !bundle.minors.is_empty();
    for p in 0..bundle.n_paths {
        let mut j0 = 0.0;
        let mut jm = 0.0;
        for node in 0..n_nodes {
            let x0 = bundle.major.at(p, node);
            let xbar = bundle.cond_mean.at(p, node);
            let u0 = controls.u0.at(p, node);
            let mut e = x0.to_vec();
            gemv_acc(&mut e, &model.h0.scale(-1.0), xbar);
            for (ei, t) in e.iter_mut().zip(model.eta0.iter()) {
                *ei -= t;
            }
            j0 += weight(node) * (quad_form(dy_q0, &e) + quad_form(dy_r0, u0));
            if have_minors {
                let mut node_sum = 0.0;
                for (j, xi_series) in bundle.minors.iter().enumerate() {
                    let xi = xi_series.at(p, node);
                    let ui = controls.minors[j].at(p, node);
                    let mut em = xi.to_vec();
                    gemv_acc(&mut em, &model.h.scale(-1.0), x0);
                    gemv_acc(&mut em, &model.hhat.scale(-1.0), xbar);
                    for (ei, t) in em.iter_mut().zip(model.eta.iter()) {
                        *ei -= t;
                    }
                    node_sum += quad_form(&model.q, &em) + quad_form(&model.r, ui);
                }
                jm += weight(node) * node_sum / bundle.minors.len() as f64;
            }
        }
        j0_samples.push(j0);
        jm_samples.push(jm);
    }
    Ok(CostReport {
        j0: mean_stderr(&j0_samples),
        j_minor_mean: mean_stderr(&jm_samples),
    })
}

/// Empirical `E int_0^T |u|^p dt` of a recorded control series.
pub fn control_moment(series: &Series, grid: &TimeGrid, n_paths: usize, p: f64) -> MeanStderr {
    let n_nodes = grid.n_nodes();
    let h = grid.h();
    let mut samples = Vec::with_capacity(n_paths);
    for path in 0..n_paths {
        let mut total = 0.0;
        for node in 0..n_nodes {
            let u = series.at(path, node);
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let w = if node == 0 || node + 1 == n_nodes {
                0.5 * h
            } else {
                h
            };
            total += w * norm.powf(p);
        }
        samples.push(total);
    }
    mean_stderr(&samples)
}
