//! Reconstruction experiments: data synthesis, δ-continuation, averaging
//! of the space-time control and the discrete value function.

mod averaging;
mod continuation;
mod data;
mod value;

pub use averaging::{average_constant, average_space_independent, average_time_independent, AverageMethod, AveragedControl};
pub use continuation::{
    continuation_solve, ContinuationResult, ContinuationSchedule, LinearSolver, ReconstructionProblem, StageDiagnostics,
    Trajectory,
};
pub use data::{add_noise, interpolate_trace, synthesize_data, CoefficientProfile, DataSettings, FluxProfile, NoiseSpec};
pub use value::{discrete_value, trajectory_value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Equation {
    #[default]
    Heat,
    Wave,
}
