//! Flat `section.key = value` experiment configuration.

use std::fmt::Write as _;

use recon_core::fem1d::{SpaceGrid, TimeGrid};
use recon_core::reconstruct::{
    CoefficientProfile, ContinuationSchedule, Equation, FluxProfile, LinearSolver, NoiseSpec,
};
use recon_core::regularization::ControlBounds;
use recon_core::solver::{Damping, KrylovConfig, NewtonConfig};
use recon_core::trace::Observation;
use recon_core::wave::{LeapfrogConfig, MassKind};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    Tanh,
    Piecewise,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    SinBurst,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingKind {
    Backtracking,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain_a: f64,
    pub domain_b: f64,
    pub elements: usize,
    pub final_time: f64,
    pub steps: usize,
    pub equation: Equation,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub deltas: Option<Vec<f64>>,
    pub delta_start: f64,
    pub delta_target: f64,
    pub delta_stages: usize,
    pub sigma_kind: SigmaKind,
    pub sigma_amplitude: f64,
    pub sigma_offset: f64,
    pub sigma_steepness: f64,
    pub sigma_center: f64,
    pub sigma_breakpoints: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub sigma_value: f64,
    pub flux_kind: FluxKind,
    pub flux_amplitude: f64,
    pub flux_frequency: f64,
    pub flux_cutoff: f64,
    pub flux_value: f64,
    pub space_refinement: usize,
    pub time_refinement: usize,
    pub data_mass: MassKind,
    pub noise_eta: f64,
    pub noise_seed: u64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub damping: DampingKind,
    pub newton_shrink: f64,
    pub newton_min_alpha: f64,
    pub newton_alpha: f64,
    pub krylov_rel_tol: f64,
    pub krylov_max_iters: usize,
    pub krylov_restart: usize,
    pub linear_solver: LinearSolver,
    pub observation: Observation,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain_a: 0.0,
            domain_b: 1.0,
            elements: 50,
            final_time: 1.0,
            steps: 50,
            equation: Equation::Heat,
            sigma_minus: 0.5,
            sigma_plus: 1.0,
            deltas: None,
            delta_start: 0.1,
            delta_target: 1e-6,
            delta_stages: 8,
            sigma_kind: SigmaKind::Tanh,
            sigma_amplitude: -0.5,
            sigma_offset: 0.75,
            sigma_steepness: 20.0,
            sigma_center: 0.5,
            sigma_breakpoints: Vec::new(),
            sigma_values: Vec::new(),
            sigma_value: 0.75,
            flux_kind: FluxKind::SinBurst,
            flux_amplitude: 1.0,
            flux_frequency: 4.0,
            flux_cutoff: 0.5,
            flux_value: 0.0,
            space_refinement: 1,
            time_refinement: 1,
            data_mass: MassKind::Consistent,
            noise_eta: 0.0,
            noise_seed: 0,
            newton_tol: 1e-8,
            newton_max_iters: 50,
            damping: DampingKind::Backtracking,
            newton_shrink: 0.5,
            newton_min_alpha: 1.0 / 1024.0,
            newton_alpha: 1.0,
            krylov_rel_tol: 1e-8,
            krylov_max_iters: 1000,
            krylov_restart: 50,
            linear_solver: LinearSolver::Direct,
            observation: Observation::BOTH,
            output_dir: "results".into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_num(key, v.trim())).collect()
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T, CliError> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("`{key}`: expected one of {}, got `{value}`", names.join("|")))
        })
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "domain.a" => self.domain_a = parse_num(key, v)?,
            "domain.b" => self.domain_b = parse_num(key, v)?,
            "domain.elements" => self.elements = parse_num(key, v)?,
            "time.final" => self.final_time = parse_num(key, v)?,
            "time.steps" => self.steps = parse_num(key, v)?,
            "problem.equation" => {
                self.equation = choice(key, v, &[("heat", Equation::Heat), ("wave", Equation::Wave)])?
            }
            "bounds.sigma_minus" => self.sigma_minus = parse_num(key, v)?,
            "bounds.sigma_plus" => self.sigma_plus = parse_num(key, v)?,
            "regularization.deltas" => self.deltas = Some(parse_list(key, v)?),
            "regularization.start" => self.delta_start = parse_num(key, v)?,
            "regularization.target" => self.delta_target = parse_num(key, v)?,
            "regularization.stages" => self.delta_stages = parse_num(key, v)?,
            "sigma_true.kind" => {
                self.sigma_kind = choice(
                    key,
                    v,
                    &[
                        ("tanh", SigmaKind::Tanh),
                        ("piecewise", SigmaKind::Piecewise),
                        ("constant", SigmaKind::Constant),
                    ],
                )?
            }
            "sigma_true.amplitude" => self.sigma_amplitude = parse_num(key, v)?,
            "sigma_true.offset" => self.sigma_offset = parse_num(key, v)?,
            "sigma_true.steepness" => self.sigma_steepness = parse_num(key, v)?,
            "sigma_true.center" => self.sigma_center = parse_num(key, v)?,
            "sigma_true.breakpoints" => self.sigma_breakpoints = parse_list(key, v)?,
            "sigma_true.values" => self.sigma_values = parse_list(key, v)?,
            "sigma_true.value" => self.sigma_value = parse_num(key, v)?,
            "flux.kind" => {
                self.flux_kind = choice(key, v, &[("sin_burst", FluxKind::SinBurst), ("constant", FluxKind::Constant)])?
            }
            "flux.amplitude" => self.flux_amplitude = parse_num(key, v)?,
            "flux.frequency" => self.flux_frequency = parse_num(key, v)?,
            "flux.cutoff_time" => self.flux_cutoff = parse_num(key, v)?,
            "flux.value" => self.flux_value = parse_num(key, v)?,
            "data.space_refinement" => self.space_refinement = parse_num(key, v)?,
            "data.time_refinement" => self.time_refinement = parse_num(key, v)?,
            "data.mass" => {
                self.data_mass = choice(key, v, &[("consistent", MassKind::Consistent), ("lumped", MassKind::Lumped)])?
            }
            "noise.eta" => self.noise_eta = parse_num(key, v)?,
            "noise.seed" => self.noise_seed = parse_num(key, v)?,
            "newton.tol" => self.newton_tol = parse_num(key, v)?,
            "newton.max_iters" => self.newton_max_iters = parse_num(key, v)?,
            "newton.damping" => {
                self.damping = choice(
                    key,
                    v,
                    &[("backtracking", DampingKind::Backtracking), ("fixed", DampingKind::Fixed)],
                )?
            }
            "newton.shrink" => self.newton_shrink = parse_num(key, v)?,
            "newton.min_alpha" => self.newton_min_alpha = parse_num(key, v)?,
            "newton.alpha" => self.newton_alpha = parse_num(key, v)?,
            "krylov.rel_tol" => self.krylov_rel_tol = parse_num(key, v)?,
            "krylov.max_iters" => self.krylov_max_iters = parse_num(key, v)?,
            "krylov.restart" => self.krylov_restart = parse_num(key, v)?,
            "solver.linear" => {
                self.linear_solver = choice(
                    key,
                    v,
                    &[("direct", LinearSolver::Direct), ("gmres_gs", LinearSolver::GmresGs)],
                )?
            }
            "measurements.observe" => {
                self.observation = choice(
                    key,
                    v,
                    &[
                        ("both", Observation::BOTH),
                        ("left", Observation { left: true, right: false }),
                        ("right", Observation { left: false, right: true }),
                    ],
                )?
            }
            "output.dir" => self.output_dir = v.to_string(),
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let wrap = |e: recon_core::Error| CliError::Config(e.to_string());
        self.space_grid().map_err(wrap)?;
        self.time_grid().map_err(wrap)?;
        self.bounds().map_err(wrap)?;
        self.schedule().map_err(wrap)?;
        self.noise().map_err(wrap)?;
        self.newton().validate().map_err(wrap)?;
        self.krylov().validate().map_err(wrap)?;
        self.sigma_true().validate().map_err(wrap)?;
        if self.space_refinement == 0 || self.time_refinement == 0 {
            return Err(CliError::Config("refinement factors must be at least 1".into()));
        }
        Ok(())
    }

    pub fn space_grid(&self) -> recon_core::Result<SpaceGrid> {
        SpaceGrid::new(self.domain_a, self.domain_b, self.elements)
    }

    pub fn time_grid(&self) -> recon_core::Result<TimeGrid> {
        TimeGrid::new(self.final_time, self.steps)
    }

    pub fn data_space_grid(&self) -> recon_core::Result<SpaceGrid> {
        SpaceGrid::new(self.domain_a, self.domain_b, self.elements * self.space_refinement)
    }

    pub fn data_time_grid(&self) -> recon_core::Result<TimeGrid> {
        TimeGrid::new(self.final_time, self.steps * self.time_refinement)
    }

    pub fn bounds(&self) -> recon_core::Result<ControlBounds> {
        ControlBounds::new(self.sigma_minus, self.sigma_plus)
    }

    pub fn schedule(&self) -> recon_core::Result<ContinuationSchedule> {
        match &self.deltas {
            Some(d) => ContinuationSchedule::new(d.clone()),
            None => ContinuationSchedule::geometric(self.delta_start, self.delta_target, self.delta_stages),
        }
    }

    pub fn noise(&self) -> recon_core::Result<NoiseSpec> {
        NoiseSpec::new(self.noise_eta, self.noise_seed)
    }

    pub fn newton(&self) -> NewtonConfig {
        NewtonConfig {
            residual_tol: self.newton_tol,
            max_iters: self.newton_max_iters,
            damping: match self.damping {
                DampingKind::Backtracking => Damping::Backtracking {
                    shrink: self.newton_shrink,
                    min_alpha: self.newton_min_alpha,
                },
                DampingKind::Fixed => Damping::Fixed(self.newton_alpha),
            },
        }
    }

    pub fn krylov(&self) -> KrylovConfig {
        KrylovConfig {
            rel_tol: self.krylov_rel_tol,
            max_iters: self.krylov_max_iters,
            restart: self.krylov_restart,
        }
    }

    pub fn leapfrog(&self) -> LeapfrogConfig {
        LeapfrogConfig {
            mass: self.data_mass,
            ..LeapfrogConfig::default()
        }
    }

    pub fn sigma_true(&self) -> CoefficientProfile {
        match self.sigma_kind {
            SigmaKind::Tanh => CoefficientProfile::Tanh {
                amplitude: self.sigma_amplitude,
                offset: self.sigma_offset,
                steepness: self.sigma_steepness,
                center: self.sigma_center,
            },
            SigmaKind::Piecewise => CoefficientProfile::Piecewise {
                breakpoints: self.sigma_breakpoints.clone(),
                values: self.sigma_values.clone(),
            },
            SigmaKind::Constant => CoefficientProfile::Constant(self.sigma_value),
        }
    }

    pub fn flux(&self) -> FluxProfile {
        match self.flux_kind {
            FluxKind::SinBurst => FluxProfile::SinBurst {
                amplitude: self.flux_amplitude,
                frequency: self.flux_frequency,
                cutoff_time: self.flux_cutoff,
            },
            FluxKind::Constant => FluxProfile::Constant(self.flux_value),
        }
    }

    /// Every key with its resolved value, in the same syntax the parser reads.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let equation = match self.equation {
            Equation::Heat => "heat",
            Equation::Wave => "wave",
        };
        let sigma_kind = match self.sigma_kind {
            SigmaKind::Tanh => "tanh",
            SigmaKind::Piecewise => "piecewise",
            SigmaKind::Constant => "constant",
        };
        let flux_kind = match self.flux_kind {
            FluxKind::SinBurst => "sin_burst",
            FluxKind::Constant => "constant",
        };
        let mass = match self.data_mass {
            MassKind::Consistent => "consistent",
            MassKind::Lumped => "lumped",
        };
        let damping = match self.damping {
            DampingKind::Backtracking => "backtracking",
            DampingKind::Fixed => "fixed",
        };
        let linear = match self.linear_solver {
            LinearSolver::Direct => "direct",
            LinearSolver::GmresGs => "gmres_gs",
        };
        let observe = match (self.observation.left, self.observation.right) {
            (true, false) => "left",
            (false, true) => "right",
            _ => "both",
        };
        let deltas = self.schedule().map(|s| join(s.deltas())).unwrap_or_default();
        let entries: Vec<(&str, String)> = vec![
            ("domain.a", format!("{:e}", self.domain_a)),
            ("domain.b", format!("{:e}", self.domain_b)),
            ("domain.elements", self.elements.to_string()),
            ("time.final", format!("{:e}", self.final_time)),
            ("time.steps", self.steps.to_string()),
            ("problem.equation", equation.into()),
            ("bounds.sigma_minus", format!("{:e}", self.sigma_minus)),
            ("bounds.sigma_plus", format!("{:e}", self.sigma_plus)),
            ("regularization.deltas", deltas),
            ("sigma_true.kind", sigma_kind.into()),
            ("sigma_true.amplitude", format!("{:e}", self.sigma_amplitude)),
            ("sigma_true.offset", format!("{:e}", self.sigma_offset)),
            ("sigma_true.steepness", format!("{:e}", self.sigma_steepness)),
            ("sigma_true.center", format!("{:e}", self.sigma_center)),
            ("sigma_true.breakpoints", join(&self.sigma_breakpoints)),
            ("sigma_true.values", join(&self.sigma_values)),
            ("sigma_true.value", format!("{:e}", self.sigma_value)),
            ("flux.kind", flux_kind.into()),
            ("flux.amplitude", format!("{:e}", self.flux_amplitude)),
            ("flux.frequency", format!("{:e}", self.flux_frequency)),
            ("flux.cutoff_time", format!("{:e}", self.flux_cutoff)),
            ("flux.value", format!("{:e}", self.flux_value)),
            ("data.space_refinement", self.space_refinement.to_string()),
            ("data.time_refinement", self.time_refinement.to_string()),
            ("data.mass", mass.into()),
            ("noise.eta", format!("{:e}", self.noise_eta)),
            ("noise.seed", self.noise_seed.to_string()),
            ("newton.tol", format!("{:e}", self.newton_tol)),
            ("newton.max_iters", self.newton_max_iters.to_string()),
            ("newton.damping", damping.into()),
            ("newton.shrink", format!("{:e}", self.newton_shrink)),
            ("newton.min_alpha", format!("{:e}", self.newton_min_alpha)),
            ("newton.alpha", format!("{:e}", self.newton_alpha)),
            ("krylov.rel_tol", format!("{:e}", self.krylov_rel_tol)),
            ("krylov.max_iters", self.krylov_max_iters.to_string()),
            ("krylov.restart", self.krylov_restart.to_string()),
            ("solver.linear", linear.into()),
            ("measurements.observe", observe.into()),
            ("output.dir", self.output_dir.clone()),
        ];
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ExperimentConfig::parse("# comment\n\ntime.steps = 20 # trailing\nproblem.equation = wave\n").unwrap();
        assert_eq!(cfg.steps, 20);
        assert_eq!(cfg.equation, Equation::Wave);
        assert_eq!(cfg.elements, 50);
        assert_eq!(cfg.schedule().unwrap().deltas().len(), 8);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("nonsense").is_err());
        assert!(ExperimentConfig::parse("domain.foo = 1").is_err());
        assert!(ExperimentConfig::parse("domain.elements = x").is_err());
        assert!(ExperimentConfig::parse("solver.linear = cholesky").is_err());
        assert!(ExperimentConfig::parse("data.time_refinement = 0").is_err());
        assert!(ExperimentConfig::parse("bounds.sigma_minus = 2").is_err());
        assert!(ExperimentConfig::parse("regularization.deltas = 0.1, 0.2").is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let cfg = ExperimentConfig::parse(
            "sigma_true.kind = piecewise\nsigma_true.breakpoints = 0.3\nsigma_true.values = 0.6, 0.9\nnoise.eta = 0.1\nmeasurements.observe = left\n",
        )
        .unwrap();
        let again = ExperimentConfig::parse(&cfg.manifest()).unwrap();
        assert_eq!(again.manifest(), cfg.manifest());
        assert_eq!(again.sigma_true(), cfg.sigma_true());
        assert_eq!(again.observation, cfg.observation);
    }
}
