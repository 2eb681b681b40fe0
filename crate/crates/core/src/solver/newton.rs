use super::{norm2, norm_inf};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    /// Every step scaled by the same `α ∈ (0, 1]`.
    Fixed(f64),
    /// Start from `α = 1` and shrink until the residual decreases
    /// (Armijo test on the Euclidean norm), stopping at `min_alpha`.
    Backtracking { shrink: f64, min_alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Tolerance on the max-norm of the stacked residual.
    pub residual_tol: f64,
    pub max_iters: usize,
    pub damping: Damping,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            max_iters: 50,
            damping: Damping::Backtracking {
                shrink: 0.5,
                min_alpha: 1.0 / 1024.0,
            },
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let ok_damping = match self.damping {
            Damping::Fixed(a) => a > 0.0 && a <= 1.0,
            Damping::Backtracking { shrink, min_alpha } => {
                shrink > 0.0 && shrink < 1.0 && min_alpha > 0.0 && min_alpha <= 1.0
            }
        };
        if !(self.residual_tol > 0.0) || !ok_damping {
            return Err(Error::InvalidInput(format!("invalid Newton config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NewtonStatus {
    Converged,
    MaxIterations,
    LinearSolverFailed(Error),
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub solution: Vec<f64>,
    /// Max-norm of the residual at each iterate, starting with `x0`.
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
    pub status: NewtonStatus,
    /// Steps taken at `min_alpha` without achieving a decrease.
    pub forced_steps: usize,
}

impl NewtonReport {
    pub fn converged(&self) -> bool {
        self.status == NewtonStatus::Converged
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_norms.last().unwrap_or(&f64::NAN)
    }
}

/// Damped Newton iteration `x ← x − α·x̂` with `J(x)·x̂ = r(x)`.
pub fn damped_newton<J>(
    residual: impl Fn(&[f64]) -> Vec<f64>,
    jacobian: impl Fn(&[f64]) -> J,
    mut linear_solve: impl FnMut(&J, &[f64]) -> Result<Vec<f64>>,
    x0: Vec<f64>,
    cfg: &NewtonConfig,
) -> NewtonReport {
    let mut x = x0;
    let mut r = residual(&x);
    let mut norms = vec![norm_inf(&r)];
    let mut forced_steps = 0;
    let mut iterations = 0;

    let status = loop {
        if norm_inf(&r) <= cfg.residual_tol {
            break NewtonStatus::Converged;
        }
        if iterations >= cfg.max_iters {
            break NewtonStatus::MaxIterations;
        }
        let jac = jacobian(&x);
        let step = match linear_solve(&jac, &r) {
            Ok(step) => step,
            Err(e) => break NewtonStatus::LinearSolverFailed(e),
        };
        iterations += 1;

        let trial = |alpha: f64| -> Vec<f64> {
            x.iter().zip(&step).map(|(xi, si)| xi - alpha * si).collect()
        };
        let (next_x, next_r) = match cfg.damping {
            Damping::Fixed(alpha) => {
                let nx = trial(alpha);
                let nr = residual(&nx);
                (nx, nr)
            }
            Damping::Backtracking { shrink, min_alpha } => {
                let r0 = norm2(&r);
                let mut alpha = 1.0;
                loop {
                    let nx = trial(alpha);
                    let nr = residual(&nx);
                    let n1 = norm2(&nr);
                    if n1.is_finite() && n1 <= (1.0 - 1e-4 * alpha) * r0 {
                        break (nx, nr);
                    }
                    if alpha * shrink < min_alpha {
                        forced_steps += 1;
                        break (nx, nr);
                    }
                    alpha *= shrink;
                }
            }
        };
        x = next_x;
        r = next_r;
        norms.push(norm_inf(&r));
    };

    NewtonReport {
        solution: x,
        residual_norms: norms,
        iterations,
        status,
        forced_steps,
    }
}
