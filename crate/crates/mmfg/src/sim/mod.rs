//! Seeded stochastic simulation: Brownian increment streams, Euler-Maruyama
//! dynamics for the conditioned mean system, the finite (N+1)-player game
//! under the equilibrium feedback, the limiting particle system sharing the
//! major noise, cost estimation and exact one-dimensional Wasserstein
//! distances.

pub mod bundle;
pub mod engine;
pub mod noise;
pub mod wasserstein;

pub use bundle::{Adjoints, Controls, EmpiricalMeasure, MinorRecord, PathBundle, Record, Series};
pub use engine::{
    control_moment, estimate_costs, mean_stderr, simulate_conditional_mean, simulate_finite_game,
    simulate_finite_game_deviated, simulate_limit_particles, ControlTweak, CostReport, Deviation,
    Dynamics, FiniteStepper, LimitStepper, MeanStderr, Player,
};
pub use noise::NoiseSource;
pub use wasserstein::wasserstein2_1d;
