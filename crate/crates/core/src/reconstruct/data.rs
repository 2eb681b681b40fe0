//! Twin-experiment data: coefficient and flux families, forward synthesis,
//! multiplicative noise and time interpolation of boundary traces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fem1d::{ElementField, SpaceGrid, TimeGrid};
use crate::heat::forward_heat_solve;
use crate::trace::BoundaryTrace;
use crate::wave::{forward_wave_solve, LeapfrogConfig};

use super::Equation;

/// Coefficient families used to build synthetic truths.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientProfile {
    /// `offset + amplitude·tanh(steepness·(x − center))`.
    Tanh {
        amplitude: f64,
        offset: f64,
        steepness: f64,
        center: f64,
    },
    /// `values[i]` on the `i`-th interval cut by the sorted `breakpoints`.
    Piecewise { breakpoints: Vec<f64>, values: Vec<f64> },
    Constant(f64),
}

impl CoefficientProfile {
    pub fn validate(&self) -> Result<()> {
        if let CoefficientProfile::Piecewise { breakpoints, values } = self {
            if values.len() != breakpoints.len() + 1 {
                return Err(Error::InvalidInput(format!(
                    "piecewise profile needs {} values for {} breakpoints, got {}",
                    breakpoints.len() + 1,
                    breakpoints.len(),
                    values.len()
                )));
            }
            if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidInput("piecewise breakpoints must increase".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CoefficientProfile::Tanh {
                amplitude,
                offset,
                steepness,
                center,
            } => offset + amplitude * (steepness * (x - center)).tanh(),
            CoefficientProfile::Piecewise { breakpoints, values } => {
                values[breakpoints.partition_point(|b| *b <= x)]
            }
            CoefficientProfile::Constant(v) => *v,
        }
    }

    /// Samples the profile at element centres.
    pub fn on_grid(&self, grid: &SpaceGrid) -> ElementField {
        ElementField::new(grid.element_centers().into_iter().map(|x| self.eval(x)).collect())
    }
}

/// Boundary flux families, applied identically at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxProfile {
    /// `amplitude·sin(frequency·t)` for `t < cutoff_time`, zero afterwards.
    SinBurst {
        amplitude: f64,
        frequency: f64,
        cutoff_time: f64,
    },
    Constant(f64),
}

impl FluxProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            FluxProfile::SinBurst {
                amplitude,
                frequency,
                cutoff_time,
            } => {
                if t < cutoff_time {
                    amplitude * (frequency * t).sin()
                } else {
                    0.0
                }
            }
            FluxProfile::Constant(v) => v,
        }
    }

    pub fn trace(&self, time: &TimeGrid) -> BoundaryTrace {
        let values: Vec<f64> = time.times().into_iter().map(|t| self.eval(t)).collect();
        BoundaryTrace::new(values.clone(), values).expect("grid has at least one level")
    }
}

/// Grids and integrator settings of the data-generating solve.
#[derive(Debug, Clone)]
pub struct DataSettings {
    pub equation: Equation,
    pub space: SpaceGrid,
    pub time: TimeGrid,
    pub leapfrog: LeapfrogConfig,
}

/// Runs the forward model with the true coefficient and returns the endpoint
/// traces on the data time grid.
pub fn synthesize_data(
    sigma_true: &CoefficientProfile,
    flux: &FluxProfile,
    settings: &DataSettings,
) -> Result<BoundaryTrace> {
    sigma_true.validate()?;
    let sigma = sigma_true.on_grid(&settings.space);
    let j = flux.trace(&settings.time);
    let levels = match settings.equation {
        Equation::Heat => forward_heat_solve(&settings.space, &settings.time, &[sigma], &j, None)?,
        Equation::Wave => forward_wave_solve(&settings.space, &settings.time, &sigma, &j, &settings.leapfrog)?,
    };
    Ok(BoundaryTrace::from_levels(&levels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    eta: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(eta: f64, seed: u64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::InvalidInput(format!("noise level must be nonnegative, got {eta}")));
        }
        Ok(Self { eta, seed })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Multiplies every sample by `1 + η·ε`, `ε ~ N(0, 1)` i.i.d.; draws go
/// level by level, left before right.
pub fn add_noise(trace: &BoundaryTrace, spec: &NoiseSpec) -> BoundaryTrace {
    if spec.eta == 0.0 {
        return trace.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = trace.clone();
    for n in 0..trace.n_levels() {
        let el: f64 = StandardNormal.sample(&mut rng);
        let er: f64 = StandardNormal.sample(&mut rng);
        out.left_mut()[n] *= 1.0 + spec.eta * el;
        out.right_mut()[n] *= 1.0 + spec.eta * er;
    }
    out
}

/// Piecewise-linear interpolation in time from `source` levels to `target` levels.
pub fn interpolate_trace(trace: &BoundaryTrace, source: &TimeGrid, target: &TimeGrid) -> Result<BoundaryTrace> {
    trace.check_levels(source.n_levels())?;
    let span = source.final_time();
    if target.final_time() > span * (1.0 + 1e-12) {
        return Err(Error::Extrapolation {
            target: target.final_time(),
            span,
        });
    }
    if source == target {
        return Ok(trace.clone());
    }
    let ks = source.k();
    let last = source.n_steps();
    let sample = |values: &[f64], t: f64| -> f64 {
        let i = ((t / ks).floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return values[0];
        }
        let w = ((t - source.time(i)) / ks).clamp(0.0, 1.0);
        (1.0 - w) * values[i] + w * values[i + 1]
    };
    let times = target.times();
    BoundaryTrace::new(
        times.iter().map(|t| sample(trace.left(), *t)).collect(),
        times.iter().map(|t| sample(trace.right(), *t)).collect(),
    )
}
