//! Solver and simulation laboratory for linear-quadratic mean field games
//! with one major and many minor players.
//!
//! The pipeline: a coefficient model ([`model::LqgModel`]) is assembled into
//! a compact forward-backward block system, decoupled through a matrix
//! Riccati equation ([`riccati`]), and the resulting equilibrium feedback is
//! exercised by seeded Monte Carlo simulation of the finite-player and
//! limiting particle systems ([`sim`]). The [`experiments`] module measures
//! convergence rates (propagation of chaos, empirical-measure rates,
//! deviation gains) and [`example6`] carries a fully scalar worked example
//! comparing two competing limiting schemes.

pub mod error;
pub mod example6;
pub mod experiments;
pub mod model;
pub mod numerics;
pub mod riccati;
pub mod sim;

pub use error::{Error, Result};
