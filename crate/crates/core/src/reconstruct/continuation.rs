//! δ-continuation: a sequence of damped Newton solves of the coupled
//! state/adjoint system, each warm-started from the previous stage.

use crate::error::{Error, Result};
use crate::fem1d::{ElementField, SpaceGrid, TimeGrid};
use crate::heat::{forward_heat_solve, heat_objective, HeatJacobianBlocks, HeatSystem, HeatTrajectory};
use crate::regularization::{ControlBounds, RegularizedHamiltonian};
use crate::solver::{
    banded_direct_solve, damped_newton, gmres_solve, BlockSystem, GmresOutcome, HeatGaussSeidel, KrylovConfig,
    NewtonConfig, NewtonReport,
};
use crate::trace::{BoundaryTrace, ElementTrace, Observation};
use crate::wave::{midpoint_wave_forward, wave_objective, WaveGaussSeidel, WaveJacobianBlocks, WaveSystem, WaveTrajectory};

use super::Equation;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSchedule {
    deltas: Vec<f64>,
}

impl ContinuationSchedule {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::InvalidInput("continuation schedule is empty".into()));
        }
        if deltas.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidInput("regularization parameters must be positive".into()));
        }
        if deltas.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidInput("regularization parameters must strictly decrease".into()));
        }
        Ok(Self { deltas })
    }

    /// `stages` values evenly spaced in `log δ` from `start` to `target`.
    pub fn geometric(start: f64, target: f64, stages: usize) -> Result<Self> {
        if stages == 0 {
            return Err(Error::InvalidInput("need at least one stage".into()));
        }
        if stages == 1 {
            return Self::new(vec![target]);
        }
        if !(start > 0.0 && target > 0.0) {
            return Err(Error::InvalidInput("regularization parameters must be positive".into()));
        }
        let ratio = (target / start).powf(1.0 / (stages - 1) as f64);
        let mut deltas: Vec<f64> = (0..stages).map(|i| start * ratio.powi(i as i32)).collect();
        deltas[stages - 1] = target;
        Self::new(deltas)
    }

    /// Eight geometric stages from `10⁻¹` to `target`.
    pub fn default_for(target: f64) -> Result<Self> {
        if target >= 0.1 {
            return Self::new(vec![target]);
        }
        Self::geometric(0.1, target, 8)
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn target(&self) -> f64 {
        *self.deltas.last().expect("nonempty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// Banded LU of the time-ordered Newton matrix.
    #[default]
    Direct,
    /// Restarted GMRES with one block Gauss–Seidel sweep as preconditioner.
    GmresGs,
}

#[derive(Debug, Clone)]
pub struct ReconstructionProblem {
    pub equation: Equation,
    pub space: SpaceGrid,
    pub time: TimeGrid,
    pub bounds: ControlBounds,
    pub schedule: ContinuationSchedule,
    pub flux: BoundaryTrace,
    pub measurements: BoundaryTrace,
    pub observation: Observation,
    pub newton: NewtonConfig,
    pub krylov: KrylovConfig,
    pub linear_solver: LinearSolver,
}

impl ReconstructionProblem {
    pub fn validate(&self) -> Result<()> {
        self.flux.check_levels(self.time.n_levels())?;
        self.measurements.check_levels(self.time.n_levels())?;
        self.newton.validate()?;
        self.krylov.validate()
    }
}

/// Converged (or best available) trajectory of either equation.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Heat(HeatTrajectory),
    Wave(WaveTrajectory),
}

impl Trajectory {
    pub fn u(&self) -> &[Vec<f64>] {
        match self {
            Trajectory::Heat(t) => &t.u,
            Trajectory::Wave(t) => &t.u,
        }
    }

    pub fn q(&self) -> &[Vec<f64>] {
        match self {
            Trajectory::Heat(t) => &t.q,
            Trajectory::Wave(t) => &t.q,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageDiagnostics {
    pub delta: f64,
    pub newton_iters: usize,
    pub linear_iters: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub forced_steps: usize,
    /// Message of the linear solver failure that stopped the stage, if any.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub trajectory: Trajectory,
    pub control: ElementTrace,
    pub stages: Vec<StageDiagnostics>,
    /// Objective of the forward solve with the constant coefficient `σ̄`.
    pub baseline_objective: f64,
}

impl ContinuationResult {
    pub fn all_converged(&self) -> bool {
        self.stages.iter().all(|s| s.converged)
    }

    pub fn final_objective(&self) -> f64 {
        self.stages.last().map_or(f64::NAN, |s| s.objective)
    }
}

/// What the Newton driver needs from a coupled space-time system.
pub(crate) trait CoupledSystem {
    type Traj: Clone;
    type Jac: BlockSystem;

    fn unpack(&self, x: &[f64]) -> Self::Traj;
    fn residual(&self, traj: &Self::Traj, reg: &RegularizedHamiltonian) -> Vec<f64>;
    fn jacobian(&self, traj: &Self::Traj, reg: &RegularizedHamiltonian) -> Self::Jac;
    fn objective(&self, traj: &Self::Traj) -> f64;
    fn control(&self, traj: &Self::Traj, reg: &RegularizedHamiltonian) -> ElementTrace;
    fn gmres_gs(jac: &Self::Jac, rhs: &[f64], cfg: &KrylovConfig) -> Result<GmresOutcome>;
}

impl CoupledSystem for HeatSystem {
    type Traj = HeatTrajectory;
    type Jac = HeatJacobianBlocks;

    fn unpack(&self, x: &[f64]) -> HeatTrajectory {
        HeatSystem::unpack(self, x)
    }
    fn residual(&self, traj: &HeatTrajectory, reg: &RegularizedHamiltonian) -> Vec<f64> {
        HeatSystem::residual(self, traj, reg)
    }
    fn jacobian(&self, traj: &HeatTrajectory, reg: &RegularizedHamiltonian) -> HeatJacobianBlocks {
        HeatSystem::jacobian(self, traj, reg)
    }
    fn objective(&self, traj: &HeatTrajectory) -> f64 {
        HeatSystem::objective(self, traj)
    }
    fn control(&self, traj: &HeatTrajectory, reg: &RegularizedHamiltonian) -> ElementTrace {
        self.extract_control(traj, reg)
    }
    fn gmres_gs(jac: &HeatJacobianBlocks, rhs: &[f64], cfg: &KrylovConfig) -> Result<GmresOutcome> {
        let pre = HeatGaussSeidel::new(jac)?;
        gmres_solve(jac, rhs, &pre, cfg)
    }
}

impl CoupledSystem for WaveSystem {
    type Traj = WaveTrajectory;
    type Jac = WaveJacobianBlocks;

    fn unpack(&self, x: &[f64]) -> WaveTrajectory {
        WaveSystem::unpack(self, x)
    }
    fn residual(&self, traj: &WaveTrajectory, reg: &RegularizedHamiltonian) -> Vec<f64> {
        WaveSystem::residual(self, traj, reg)
    }
    fn jacobian(&self, traj: &WaveTrajectory, reg: &RegularizedHamiltonian) -> WaveJacobianBlocks {
        WaveSystem::jacobian(self, traj, reg)
    }
    fn objective(&self, traj: &WaveTrajectory) -> f64 {
        WaveSystem::objective(self, traj)
    }
    fn control(&self, traj: &WaveTrajectory, reg: &RegularizedHamiltonian) -> ElementTrace {
        self.extract_control(traj, reg)
    }
    fn gmres_gs(jac: &WaveJacobianBlocks, rhs: &[f64], cfg: &KrylovConfig) -> Result<GmresOutcome> {
        let pre = WaveGaussSeidel::new(jac)?;
        gmres_solve(jac, rhs, &pre, cfg)
    }
}

/// One damped Newton solve at fixed δ. Returns the report and the total
/// number of GMRES iterations (zero for the direct solver).
pub(crate) fn newton_stage<S: CoupledSystem>(
    sys: &S,
    reg: &RegularizedHamiltonian,
    x0: Vec<f64>,
    newton: &NewtonConfig,
    krylov: &KrylovConfig,
    linear: LinearSolver,
) -> (NewtonReport, usize) {
    let mut linear_iters = 0;
    let report = damped_newton(
        |x| sys.residual(&sys.unpack(x), reg),
        |x| sys.jacobian(&sys.unpack(x), reg),
        |jac, r| match linear {
            LinearSolver::Direct => banded_direct_solve(jac, r),
            LinearSolver::GmresGs => {
                let out = S::gmres_gs(jac, r, krylov)?;
                linear_iters += out.iterations;
                if out.converged {
                    Ok(out.solution)
                } else {
                    Err(Error::NotConverged {
                        iterations: out.iterations,
                        residual: out.residual_norm,
                    })
                }
            }
        },
        x0,
        newton,
    );
    (report, linear_iters)
}

fn run_stages<S: CoupledSystem>(
    sys: &S,
    problem: &ReconstructionProblem,
    x0: Vec<f64>,
) -> Result<(S::Traj, ElementTrace, Vec<StageDiagnostics>)> {
    let mut x = x0;
    let mut stages = Vec::with_capacity(problem.schedule.deltas().len());
    let mut reg = RegularizedHamiltonian::new(problem.bounds, problem.schedule.deltas()[0])?;
    for &delta in problem.schedule.deltas() {
        reg = reg.with_delta(delta)?;
        let (report, linear_iters) =
            newton_stage(sys, &reg, x, &problem.newton, &problem.krylov, problem.linear_solver);
        let traj = sys.unpack(&report.solution);
        stages.push(StageDiagnostics {
            delta,
            newton_iters: report.iterations,
            linear_iters,
            initial_residual: report.residual_norms[0],
            final_residual: report.final_residual(),
            objective: sys.objective(&traj),
            converged: report.converged(),
            forced_steps: report.forced_steps,
            failure: match &report.status {
                crate::solver::NewtonStatus::LinearSolverFailed(e) => Some(e.to_string()),
                _ => None,
            },
            residual_history: report.residual_norms,
        });
        x = report.solution;
    }
    let traj = sys.unpack(&x);
    let control = sys.control(&traj, &reg);
    Ok((traj, control, stages))
}

/// Runs every stage of the schedule. The first stage starts from
/// `initial_guess` or from `u = q = 0`; a stage that fails to converge is
/// flagged in its diagnostics and its last iterate seeds the next stage.
pub fn continuation_solve(
    problem: &ReconstructionProblem,
    initial_guess: Option<&Trajectory>,
) -> Result<ContinuationResult> {
    problem.validate()?;
    let sigma_bar = ElementField::constant(problem.space.n_elements(), problem.bounds.sigma_bar());
    match problem.equation {
        Equation::Heat => {
            let sys = HeatSystem::new(
                problem.space.clone(),
                problem.time.clone(),
                problem.flux.clone(),
                problem.measurements.clone(),
            )?
            .with_observation(problem.observation);
            let x0 = match initial_guess {
                Some(Trajectory::Heat(t)) => sys.pack(t),
                Some(Trajectory::Wave(_)) => {
                    return Err(Error::InvalidInput("wave trajectory given as heat initial guess".into()))
                }
                None => vec![0.0; sys.n_unknowns()],
            };
            let u_bar = forward_heat_solve(&problem.space, &problem.time, &[sigma_bar], &problem.flux, None)?;
            let baseline_objective = heat_objective(&u_bar, &problem.measurements, &problem.time, problem.observation);
            let (traj, control, stages) = run_stages(&sys, problem, x0)?;
            Ok(ContinuationResult {
                trajectory: Trajectory::Heat(traj),
                control,
                stages,
                baseline_objective,
            })
        }
        Equation::Wave => {
            let sys = WaveSystem::new(
                problem.space.clone(),
                problem.time.clone(),
                problem.flux.clone(),
                problem.measurements.clone(),
            )?
            .with_observation(problem.observation);
            let x0 = match initial_guess {
                Some(Trajectory::Wave(t)) => sys.pack(t),
                Some(Trajectory::Heat(_)) => {
                    return Err(Error::InvalidInput("heat trajectory given as wave initial guess".into()))
                }
                None => vec![0.0; sys.n_unknowns()],
            };
            let (u_bar, _) = midpoint_wave_forward(&problem.space, &problem.time, &sigma_bar, &problem.flux, None)?;
            let baseline_objective = wave_objective(&u_bar, &problem.measurements, &problem.time, problem.observation);
            let (traj, control, stages) = run_stages(&sys, problem, x0)?;
            Ok(ContinuationResult {
                trajectory: Trajectory::Wave(traj),
                control,
                stages,
                baseline_objective,
            })
        }
    }
}
