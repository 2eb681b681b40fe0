//! Time series at the two boundary nodes and per-element control histories.

use crate::error::{Error, Result};
use crate::fem1d::{boundary_load, NodalField, SpaceGrid};

/// Values at the left and right endpoint for every time level `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl BoundaryTrace {
    pub fn new(left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if left.len() != right.len() || left.is_empty() {
            return Err(Error::InvalidInput(format!(
                "boundary trace sides differ in length ({} vs {})",
                left.len(),
                right.len()
            )));
        }
        Ok(Self { left, right })
    }

    pub fn zeros(n_levels: usize) -> Self {
        Self {
            left: vec![0.0; n_levels],
            right: vec![0.0; n_levels],
        }
    }

    /// Extracts endpoint values from a sequence of nodal fields.
    pub fn from_levels(levels: &[NodalField]) -> Self {
        Self {
            left: levels.iter().map(|u| u[0]).collect(),
            right: levels.iter().map(|u| u[u.len() - 1]).collect(),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.left.len()
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn left_mut(&mut self) -> &mut [f64] {
        &mut self.left
    }

    pub fn right_mut(&mut self) -> &mut [f64] {
        &mut self.right
    }

    pub fn at(&self, level: usize) -> (f64, f64) {
        (self.left[level], self.right[level])
    }

    /// Average of levels `n` and `n+1`.
    pub fn midpoint(&self, n: usize) -> (f64, f64) {
        (
            0.5 * (self.left[n] + self.left[n + 1]),
            0.5 * (self.right[n] + self.right[n + 1]),
        )
    }

    pub(crate) fn check_levels(&self, n_levels: usize) -> Result<()> {
        if self.n_levels() != n_levels {
            return Err(Error::DimensionMismatch {
                expected: n_levels,
                got: self.n_levels(),
            });
        }
        Ok(())
    }
}

/// Which endpoints carry measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub left: bool,
    pub right: bool,
}

impl Default for Observation {
    fn default() -> Self {
        Self::BOTH
    }
}

impl Observation {
    pub const BOTH: Self = Self {
        left: true,
        right: true,
    };

    fn weights(&self) -> (f64, f64) {
        (
            if self.left { 1.0 } else { 0.0 },
            if self.right { 1.0 } else { 0.0 },
        )
    }

    /// Squared misfit summed over the observed endpoints.
    pub fn misfit(&self, u: &[f64], data: (f64, f64)) -> f64 {
        let (wl, wr) = self.weights();
        let dl = u[0] - data.0;
        let dr = u[u.len() - 1] - data.1;
        wl * dl * dl + wr * dr * dr
    }

    /// Load vector of the misfit `(u − u*)` at the observed endpoints.
    pub fn misfit_load(&self, grid: &SpaceGrid, u: &[f64], data: (f64, f64)) -> NodalField {
        let (wl, wr) = self.weights();
        boundary_load(grid, wl * (u[0] - data.0), wr * (u[u.len() - 1] - data.1))
    }

    /// `(w_left, w_right)` as the diagonal of the boundary mass.
    pub fn boundary_weights(&self) -> (f64, f64) {
        self.weights()
    }
}

/// Control history `σ̃ = h'_δ(∇u·∇q)` for every time step and element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementTrace {
    /// Time label of each step (the pairing's representative time).
    pub times: Vec<f64>,
    /// `∇u·∇q` per step, per element.
    pub products: Vec<Vec<f64>>,
    /// `h'_δ(∇u·∇q)` per step, per element.
    pub sigma: Vec<Vec<f64>>,
}

impl ElementTrace {
    pub fn n_steps(&self) -> usize {
        self.products.len()
    }

    pub fn n_elements(&self) -> usize {
        self.products.first().map_or(0, Vec::len)
    }
}
