//! Deterministic dense-matrix and ODE kernels shared by every solver.
//!
//! Everything here is a pure function of its inputs and safe to call from
//! any number of worker threads.

pub mod grid;
pub mod linalg;
pub mod matrix;
pub mod ode;

pub use grid::{GriddedTrajectory, TimeGrid};
pub use linalg::{expm, invert_checked, min_singular_value, sym_eigenvalues};
pub use matrix::{block_matrix, Matrix};
pub use ode::rk4_backward;

/// Default condition-number threshold, near the double-precision
/// reliability limit.
pub const DEFAULT_COND_THRESHOLD: f64 = 1e12;

/// Default step count for a unit horizon.
pub const DEFAULT_N_STEPS: usize = 1000;
