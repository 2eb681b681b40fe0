//! Newton–Krylov machinery for the all-at-once space-time systems.

mod banded;
mod gmres;
mod newton;
mod precond;

pub use banded::{banded_direct_solve, time_ordered_band, BandedLu, BandedMatrix, BlockSystem};
pub use gmres::{gmres_solve, GmresOutcome, KrylovConfig};
pub use newton::{damped_newton, Damping, NewtonConfig, NewtonReport, NewtonStatus};
pub use precond::HeatGaussSeidel;

/// Matrix-free linear map `x ↦ A·x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `A·x` into `y` (overwriting it).
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub(crate) fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}
