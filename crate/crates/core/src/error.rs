use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("zero pivot at row {row} (time block {block})")]
    SingularPivot { row: usize, block: usize },

    #[error("time step {k} exceeds the stability bound {limit}")]
    StabilityBound { k: f64, limit: f64 },

    #[error("forward solve blew up at time level {level}")]
    BlowUp { level: usize },

    #[error("target time {target} lies outside the sampled span [0, {span}]")]
    Extrapolation { target: f64, span: f64 },

    #[error("GMRES breakdown after {iterations} iterations (residual {residual:e})")]
    Breakdown { iterations: usize, residual: f64 },

    #[error("GMRES did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
