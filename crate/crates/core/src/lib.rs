//! Reconstruction of a spatially varying PDE coefficient (heat conductivity
//! or squared wave speed) from boundary measurements.
//!
//! The coefficient is treated as an optimal control. Eliminating it through
//! the pointwise-optimal (bang-bang) law turns the problem into a Hamiltonian
//! system of coupled forward and adjoint equations. That system is smoothed
//! with a tanh regularization, discretized in time by a symplectic scheme,
//! and solved all-at-once by Newton–Krylov with continuation in the
//! regularization parameter.

pub mod error;
pub mod fem1d;
pub mod heat;
pub mod reconstruct;
pub mod regularization;
pub mod solver;
pub mod trace;
pub mod wave;

pub use error::{Error, Result};
