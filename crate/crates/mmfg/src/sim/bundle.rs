//! Storage for simulated trajectories and empirical measures.

use crate::error::{Error, Result};
use crate::numerics::TimeGrid;

/// Which minor particles to keep in the bundle. Large experiments record
/// only the first particle (or none) and stream everything else.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinorRecord {
    All,
    First(usize),
    None,
}

/// Recording policy for a simulation run.
#[derive(Clone, Copy, Debug)]
pub struct Record {
    pub minors: MinorRecord,
    pub adjoints: bool,
    pub controls: bool,
}

impl Record {
    pub fn everything() -> Self {
        Self {
            minors: MinorRecord::All,
            adjoints: true,
            controls: true,
        }
    }

    pub fn states_only() -> Self {
        Self {
            minors: MinorRecord::None,
            adjoints: false,
            controls: false,
        }
    }
}

/// One flat time series: `data[(path * n_nodes + node) * dim + i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub dim: usize,
    pub n_nodes: usize,
    pub data: Vec<f64>,
}

impl Series {
    pub fn zeros(n_paths: usize, n_nodes: usize, dim: usize) -> Self {
        Self {
            dim,
            n_nodes,
            data: vec![0.0; n_paths * n_nodes * dim],
        }
    }

    #[inline]
    pub fn at(&self, path: usize, node: usize) -> &[f64] {
        let off = (path * self.n_nodes + node) * self.dim;
        &self.data[off..off + self.dim]
    }

    #[inline]
    pub fn at_mut(&mut self, path: usize, node: usize) -> &mut [f64] {
        let off = (path * self.n_nodes + node) * self.dim;
        &mut self.data[off..off + self.dim]
    }

    /// Mutable view of one path's rows, for parallel writers.
    pub fn path_chunk_len(&self) -> usize {
        self.n_nodes * self.dim
    }
}

/// Reconstructed adjoint trajectories of the conditioned system.
#[derive(Clone, Debug)]
pub struct Adjoints {
    pub p0bar: Series,
    pub pbar: Series,
    pub ybar: Series,
}

/// Recorded equilibrium (or deviated) controls.
#[derive(Clone, Debug)]
pub struct Controls {
    pub u0: Series,
    /// One series per recorded minor, in particle order.
    pub minors: Vec<Series>,
}

/// Simulated trajectories on a common grid and seeded noise.
#[derive(Clone, Debug)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    /// X0 (major state), dim d0.
    pub major: Series,
    /// Exact conditional mean or running empirical mean, dim d.
    pub cond_mean: Series,
    /// Recorded minor particles, dim d each.
    pub minors: Vec<Series>,
    pub adjoints: Option<Adjoints>,
    pub controls: Option<Controls>,
}

impl PathBundle {
    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }
}

/// Equally weighted atoms in R^d, flattened row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || !atoms.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "empirical measure needs k*{dim} coordinates for k >= 1 atoms, got {}",
                atoms.len()
            )));
        }
        Ok(Self { dim, atoms })
    }

    pub fn from_scalars(atoms: &[f64]) -> Result<Self> {
        Self::new(1, atoms.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.atoms.len() / self.dim
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_layout() {
        let mut s = Series::zeros(2, 3, 2);
        s.at_mut(1, 2)[1] = 7.0;
        assert_eq!(s.at(1, 2), &[0.0, 7.0]);
        assert_eq!(s.at(0, 0), &[0.0, 0.0]);
    }

    #[test]
    fn measure_invariants() {
        assert!(EmpiricalMeasure::new(1, vec![]).is_err());
        assert!(EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0]).is_err());
        let m = EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.count(), 2);
        assert_eq!(m.atom(1), &[3.0, 4.0]);
    }
}
