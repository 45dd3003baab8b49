//! Coefficient data for the linear-quadratic game with one major and many
//! minor players, plus assembly of the compact block system that drives the
//! Riccati decoupling.
//!
//! State dynamics:
//!
//! ```text
//! dX0 = (A0 X0 + B0 u0 + F0 Xbar) dt + D0 dW0
//! dXi = (A Xi + B ui + F Xbar + G X0) dt + D dWi
//! ```
//!
//! Running costs track the affine targets `Phi(x) = H0 x + eta0` (major) and
//! `Psi(x0, xbar) = H x0 + Hhat xbar + eta` (minor); there are no terminal
//! cost terms, so every backward variable vanishes at the horizon.

use crate::error::{Error, Result};
use crate::numerics::{block_matrix, invert_checked, sym_eigenvalues, Matrix};
use serde::{Deserialize, Serialize};

/// Symmetry tolerance for the cost-weight checks; robust to entry round-off
/// in hand-written config files.
const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalue slack when testing positive semidefiniteness.
const PSD_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LqgModel {
    pub d0: usize,
    pub d: usize,
    pub k0: usize,
    pub k: usize,
    pub m0: usize,
    pub m: usize,
    #[serde(rename = "T")]
    pub horizon: f64,

    #[serde(rename = "A0")]
    pub a0: Matrix,
    #[serde(rename = "B0")]
    pub b0: Matrix,
    #[serde(rename = "F0")]
    pub f0: Matrix,
    #[serde(rename = "D0")]
    pub d0_noise: Matrix,

    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "F")]
    pub f: Matrix,
    #[serde(rename = "G")]
    pub g: Matrix,
    #[serde(rename = "D")]
    pub d_noise: Matrix,

    #[serde(rename = "Q0")]
    pub q0: Matrix,
    #[serde(rename = "R0")]
    pub r0: Matrix,
    #[serde(rename = "H0")]
    pub h0: Matrix,
    pub eta0: Vec<f64>,

    #[serde(rename = "Q")]
    pub q: Matrix,
    #[serde(rename = "R")]
    pub r: Matrix,
    #[serde(rename = "H")]
    pub h: Matrix,
    #[serde(rename = "Hhat")]
    pub hhat: Matrix,
    pub eta: Vec<f64>,

    pub x0_major: Vec<f64>,
    pub x0_minor: Vec<f64>,
}

impl LqgModel {
    /// A model with the given dimensions and every coefficient zero except
    /// unit control weights. Convenient starting point for tests and configs.
    pub fn zeros(d0: usize, d: usize, k0: usize, k: usize, m0: usize, m: usize, horizon: f64) -> Self {
        Self {
            d0,
            d,
            k0,
            k,
            m0,
            m,
            horizon,
            a0: Matrix::zeros(d0, d0),
            b0: Matrix::zeros(d0, k0),
            f0: Matrix::zeros(d0, d),
            d0_noise: Matrix::zeros(d0, m0),
            a: Matrix::zeros(d, d),
            b: Matrix::zeros(d, k),
            f: Matrix::zeros(d, d),
            g: Matrix::zeros(d, d0),
            d_noise: Matrix::zeros(d, m),
            q0: Matrix::zeros(d0, d0),
            r0: Matrix::identity(k0),
            h0: Matrix::zeros(d0, d),
            eta0: vec![0.0; d0],
            q: Matrix::zeros(d, d),
            r: Matrix::identity(k),
            h: Matrix::zeros(d, d0),
            hhat: Matrix::zeros(d, d),
            eta: vec![0.0; d],
            x0_major: vec![0.0; d0],
            x0_minor: vec![0.0; d],
        }
    }

    /// Checks dimensional consistency, symmetry of the cost weights,
    /// positive definiteness of `R0`/`R` and semidefiniteness of `Q0`/`Q`.
    /// Returns every violation found; an empty list means the model is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.d0 == 0 || self.d == 0 || self.k0 == 0 || self.k == 0 || self.m0 == 0 || self.m == 0
        {
            v.push("all dimensions must be at least 1".to_string());
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            v.push(format!("horizon T must be positive, got {}", self.horizon));
        }
        let shapes: [(&str, &Matrix, usize, usize); 14] = [
            ("A0", &self.a0, self.d0, self.d0),
            ("B0", &self.b0, self.d0, self.k0),
            ("F0", &self.f0, self.d0, self.d),
            ("D0", &self.d0_noise, self.d0, self.m0),
            ("A", &self.a, self.d, self.d),
            ("B", &self.b, self.d, self.k),
            ("F", &self.f, self.d, self.d),
            ("G", &self.g, self.d, self.d0),
            ("D", &self.d_noise, self.d, self.m),
            ("Q0", &self.q0, self.d0, self.d0),
            ("R0", &self.r0, self.k0, self.k0),
            ("H0", &self.h0, self.d0, self.d),
            ("Q", &self.q, self.d, self.d),
            ("R", &self.r, self.k, self.k),
        ];
        for (name, m, r, c) in shapes {
            if m.shape() != (r, c) {
                v.push(format!(
                    "{name} has shape {}x{}, expected {r}x{c}",
                    m.rows(),
                    m.cols()
                ));
            }
        }
        if self.h.shape() != (self.d, self.d0) {
            v.push(format!(
                "H has shape {}x{}, expected {}x{}",
                self.h.rows(),
                self.h.cols(),
                self.d,
                self.d0
            ));
        }
        if self.hhat.shape() != (self.d, self.d) {
            v.push(format!(
                "Hhat has shape {}x{}, expected {}x{}",
                self.hhat.rows(),
                self.hhat.cols(),
                self.d,
                self.d
            ));
        }
        for (name, vec, len) in [
            ("eta0", &self.eta0, self.d0),
            ("eta", &self.eta, self.d),
            ("x0_major", &self.x0_major, self.d0),
            ("x0_minor", &self.x0_minor, self.d),
        ] {
            if vec.len() != len {
                v.push(format!("{name} has length {}, expected {len}", vec.len()));
            }
            if vec.iter().any(|x| !x.is_finite()) {
                v.push(format!("{name} has a non-finite entry"));
            }
        }
        // Definiteness checks only make sense on correctly shaped matrices.
        for (name, m, strict) in [
            ("Q0", &self.q0, false),
            ("Q", &self.q, false),
            ("R0", &self.r0, true),
            ("R", &self.r, true),
        ] {
            if !m.is_square() {
                continue;
            }
            if !m.is_symmetric(SYMMETRY_TOL) {
                v.push(format!("{name} not symmetric"));
                continue;
            }
            if let Ok(eigs) = sym_eigenvalues(m) {
                let min = eigs.first().copied().unwrap_or(0.0);
                if strict && min <= 0.0 {
                    v.push(format!("{name} not positive definite"));
                } else if !strict && min < -PSD_TOL {
                    v.push(format!("{name} not positive semidefinite"));
                }
            }
        }
        v
    }

    pub fn validated(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    /// `-1/2 B0 R0^{-1} B0^T`
    pub fn control_gain_major(&self) -> Result<Matrix> {
        let r0_inv = invert_checked(&self.r0, 1e14)?;
        Ok((&(&self.b0 * &r0_inv) * &self.b0.transpose()).scale(-0.5))
    }

    /// `-1/2 B R^{-1} B^T`
    pub fn control_gain_minor(&self) -> Result<Matrix> {
        let r_inv = invert_checked(&self.r, 1e14)?;
        Ok((&(&self.b * &r_inv) * &self.b.transpose()).scale(-0.5))
    }

    pub fn assemble_compact(&self) -> Result<AssembledSystem> {
        AssembledSystem::from_model(self)
    }
}

/// Compact-form block system for the conditioned forward-backward pair
///
/// ```text
/// dXX = ( Abb XX + Bbb YY + Cbb ) dt + Dbb dW0
/// dYY = -( Ahat XX + Bhat YY + Chat ) dt + ZZ dW0
/// ```
///
/// with `XX = (X0, Xbar)` and `YY = (P0bar, Pbar, Ybar)`.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub d0: usize,
    pub d: usize,
    /// (d0+d) x (d0+d)
    pub abb: Matrix,
    /// (d0+d) x (d0+2d)
    pub bbb: Matrix,
    /// (d0+d) x m0
    pub dbb: Matrix,
    /// (d0+2d) x (d0+d)
    pub ahat: Matrix,
    /// (d0+2d) x (d0+2d)
    pub bhat: Matrix,
    /// (d0+d) x 1, identically zero here (no affine forward drift)
    pub cbb: Matrix,
    /// (d0+2d) x 1 constant drift of the backward block
    pub chat: Matrix,
    /// (2d0+3d) square generator of the two-point boundary-value flow,
    /// `[[Abb, Bbb], [-Ahat, -Bhat]]`
    pub bcal: Matrix,
}

impl AssembledSystem {
    pub fn from_model(model: &LqgModel) -> Result<Self> {
        model.validated()?;
        let (d0, d) = (model.d0, model.d);
        let gain0 = model.control_gain_major()?;
        let gain = model.control_gain_minor()?;

        let a_plus_f = &model.a + &model.f;
        let abb = block_matrix(&[
            vec![&model.a0, &model.f0],
            vec![&model.g, &a_plus_f],
        ]);

        let z0d = Matrix::zeros(d0, d);
        let zd0 = Matrix::zeros(d, d0);
        let zdd = Matrix::zeros(d, d);
        let bbb = block_matrix(&[
            vec![&gain0, &z0d, &z0d],
            vec![&zd0, &zdd, &gain],
        ]);

        let zdm0 = Matrix::zeros(d, model.m0);
        let dbb = block_matrix(&[vec![&model.d0_noise], vec![&zdm0]]);

        let q0h0 = (&model.q0 * &model.h0).scale(-2.0);
        let h0tq0 = (&model.h0.transpose() * &model.q0).scale(2.0);
        let h0tq0h0 = (&(&model.h0.transpose() * &model.q0) * &model.h0).scale(-2.0);
        let two_q0 = model.q0.scale(2.0);
        let qh = (&model.q * &model.h).scale(-2.0);
        let q_minus_qhhat = &model.q.scale(2.0) - &(&model.q * &model.hhat).scale(2.0);
        let ahat = block_matrix(&[
            vec![&two_q0, &q0h0],
            vec![&h0tq0, &h0tq0h0],
            vec![&qh, &q_minus_qhhat],
        ]);

        let a0t = model.a0.transpose();
        let gt = model.g.transpose();
        let f0t = model.f0.transpose();
        let at_plus_ft = a_plus_f.transpose();
        let at = model.a.transpose();
        let z0d0_t = Matrix::zeros(d0, d);
        let bhat = block_matrix(&[
            vec![&a0t, &gt, &z0d0_t],
            vec![&f0t, &at_plus_ft, &zdd],
            vec![&zd0, &zdd, &at],
        ]);

        let cbb = Matrix::zeros(d0 + d, 1);
        let eta0 = Matrix::col(&model.eta0);
        let eta = Matrix::col(&model.eta);
        let c1 = (&model.q0 * &eta0).scale(-2.0);
        let c2 = (&(&model.h0.transpose() * &model.q0) * &eta0).scale(-2.0);
        let c3 = (&model.q * &eta).scale(-2.0);
        let chat = block_matrix(&[vec![&c1], vec![&c2], vec![&c3]]);

        let neg_ahat = ahat.scale(-1.0);
        let neg_bhat = bhat.scale(-1.0);
        let bcal = block_matrix(&[
            vec![&abb, &bbb],
            vec![&neg_ahat, &neg_bhat],
        ]);

        Ok(Self {
            d0,
            d,
            abb,
            bbb,
            dbb,
            ahat,
            bhat,
            cbb,
            chat,
            bcal,
        })
    }

    /// Build directly from blocks (scalar reductions and synthetic systems in
    /// tests). `dbb`, `cbb`, `chat` default to zero.
    pub fn from_blocks(d0: usize, d: usize, abb: Matrix, bbb: Matrix, ahat: Matrix, bhat: Matrix) -> Self {
        let nf = d0 + d;
        let nb = d0 + 2 * d;
        assert_eq!(abb.shape(), (nf, nf));
        assert_eq!(bbb.shape(), (nf, nb));
        assert_eq!(ahat.shape(), (nb, nf));
        assert_eq!(bhat.shape(), (nb, nb));
        let neg_ahat = ahat.scale(-1.0);
        let neg_bhat = bhat.scale(-1.0);
        let bcal = block_matrix(&[vec![&abb, &bbb], vec![&neg_ahat, &neg_bhat]]);
        Self {
            d0,
            d,
            abb,
            bbb,
            dbb: Matrix::zeros(nf, 1),
            ahat,
            bhat,
            cbb: Matrix::zeros(nf, 1),
            chat: Matrix::zeros(nb, 1),
            bcal,
        }
    }

    pub fn forward_dim(&self) -> usize {
        self.d0 + self.d
    }

    pub fn backward_dim(&self) -> usize {
        self.d0 + 2 * self.d
    }
}

/// Deterministic small random model, used by the self-test suites.
/// Coefficients are kept modest so the Riccati flow stays well inside its
/// solvable regime on a unit horizon.
pub fn random_model(seed: u64, d0: usize, d: usize) -> LqgModel {
    struct Rng(u64);
    impl Rng {
        fn uni(&mut self, lo: f64, hi: f64) -> f64 {
            self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = self.0;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            lo + (hi - lo) * ((z >> 11) as f64) / ((1u64 << 53) as f64)
        }
        fn mat(&mut self, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
            let mut m = Matrix::zeros(r, c);
            for i in 0..r {
                for j in 0..c {
                    m.set(i, j, self.uni(lo, hi));
                }
            }
            m
        }
        fn vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
            (0..n).map(|_| self.uni(lo, hi)).collect()
        }
    }
    fn psd(l: &Matrix, floor: f64) -> Matrix {
        let mut m = &l.transpose() * l;
        for i in 0..m.rows() {
            let v = m.get(i, i) + floor;
            m.set(i, i, v);
        }
        m
    }

    let mut rng = Rng(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));
    let mut model = LqgModel::zeros(d0, d, 1, 1, d0, d, 1.0);
    model.a0 = rng.mat(d0, d0, -0.6, 0.6);
    model.b0 = rng.mat(d0, 1, 0.5, 1.2);
    model.f0 = rng.mat(d0, d, -0.5, 0.5);
    model.d0_noise = rng.mat(d0, d0, 0.2, 0.6);
    model.a = rng.mat(d, d, -0.6, 0.6);
    model.b = rng.mat(d, 1, 0.5, 1.2);
    model.f = rng.mat(d, d, -0.4, 0.4);
    model.g = rng.mat(d, d0, -0.5, 0.5);
    model.d_noise = rng.mat(d, d, 0.2, 0.6);
    model.q0 = psd(&rng.mat(d0, d0, -0.5, 0.5), 0.2);
    model.r0 = psd(&rng.mat(1, 1, 0.3, 0.8), 1.0);
    model.h0 = rng.mat(d0, d, -0.3, 0.3);
    model.eta0 = rng.vec(d0, -0.4, 0.4);
    model.q = psd(&rng.mat(d, d, -0.5, 0.5), 0.2);
    model.r = psd(&rng.mat(1, 1, 0.3, 0.8), 1.0);
    model.h = rng.mat(d, d0, -0.3, 0.3);
    model.hhat = rng.mat(d, d, -0.3, 0.3);
    model.eta = rng.vec(d, -0.4, 0.4);
    model.x0_major = rng.vec(d0, -1.0, 1.0);
    model.x0_minor = rng.vec(d, -1.0, 1.0);
    model
}
