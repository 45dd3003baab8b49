//! Uniform time grids and matrix-valued trajectories stored on them.

use super::matrix::Matrix;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform grid t0 = tau_0 < ... < tau_n = t1. Nodes are recomputed from
/// `(t0, t1, n_steps)` so two grids with equal parameters produce bitwise
/// identical node times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
            return Err(Error::InvalidArgument(format!(
                "time grid needs t0 < t1, got [{t0}, {t1}]"
            )));
        }
        if n_steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "time grid needs at least 2 steps, got {n_steps}"
            )));
        }
        Ok(Self { t0, t1, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn h(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n_steps);
        if i == self.n_steps {
            self.t1
        } else {
            self.t0 + i as f64 * self.h()
        }
    }

    /// Index of the step interval containing `t`, and the bracketing weight.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if t < self.t0 || t > self.t1 {
            return Err(Error::OutOfRange {
                t,
                t0: self.t0,
                t1: self.t1,
            });
        }
        let h = self.h();
        let mut k = (((t - self.t0) / h).floor() as usize).min(self.n_steps - 1);
        // Snap to an exact node when the query time matches it bitwise.
        if t == self.node(k + 1) {
            k += 1;
            return Ok((k.min(self.n_steps - 1), if k == self.n_steps { 1.0 } else { 0.0 }));
        }
        if k > 0 && t < self.node(k) {
            k -= 1;
        }
        let w = (t - self.node(k)) / h;
        Ok((k, w.clamp(0.0, 1.0)))
    }
}

/// A matrix-valued function of time sampled at every grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddedTrajectory {
    grid: TimeGrid,
    values: Vec<Matrix>,
}

impl GriddedTrajectory {
    pub fn new(grid: TimeGrid, values: Vec<Matrix>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch(format!(
                "trajectory has {} values for a grid with {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        let shape = values[0].shape();
        if values.iter().any(|v| v.shape() != shape) {
            return Err(Error::GridMismatch("trajectory values differ in shape".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: Matrix) -> Self {
        let values = vec![value; grid.n_nodes()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn value(&self, node: usize) -> &Matrix {
        &self.values[node]
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values[0].shape()
    }

    pub fn terminal(&self) -> &Matrix {
        self.values.last().unwrap()
    }

    /// Linear interpolation between the bracketing nodes; exact at nodes.
    pub fn eval(&self, t: f64) -> Result<Matrix> {
        let (k, w) = self.grid.locate(t)?;
        if w == 0.0 {
            return Ok(self.values[k].clone());
        }
        if w == 1.0 {
            return Ok(self.values[k + 1].clone());
        }
        let mut out = self.values[k].scale(1.0 - w);
        out.axpy(w, &self.values[k + 1]);
        Ok(out)
    }

    /// Apply `f` node-wise, keeping the grid.
    pub fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
        }
    }

    /// Largest entry magnitude of `self - other` over all nodes.
    pub fn max_gap(&self, other: &GriddedTrajectory) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "grid mismatch");
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).max_abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_invariants() {
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 0.0, 10).is_err());
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(4), 1.0);
        assert_eq!(g.h(), 0.25);
        // Nodes are a pure function of the parameters.
        let g2 = TimeGrid::new(0.0, 1.0, 4).unwrap();
        for i in 0..=4 {
            assert_eq!(g.node(i).to_bits(), g2.node(i).to_bits());
        }
    }

    #[test]
    fn interp_exact_at_nodes_and_linear_between() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let vals = vec![
            Matrix::col(&[0.0]),
            Matrix::col(&[1.0]),
            Matrix::col(&[4.0]),
        ];
        let traj = GriddedTrajectory::new(g, vals).unwrap();
        assert_eq!(traj.eval(0.5).unwrap().get(0, 0), 1.0);
        assert_eq!(traj.eval(1.0).unwrap().get(0, 0), 4.0);
        // Midpoint of a linear segment is the mean of the endpoints.
        assert_eq!(traj.eval(0.25).unwrap().get(0, 0), 0.5);
        assert!(traj.eval(1.5).is_err());
        assert!(traj.eval(-0.1).is_err());
    }
}
