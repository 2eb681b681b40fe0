//! Post-processing of the space-time control `σ̃` into coefficients that
//! depend on fewer variables.
//!
//! All time integrals use the rectangle rule with weight `k` per step, on
//! exactly the pairing the solver used for `σ̃`.

use crate::fem1d::{ElementField, SpaceGrid};
use crate::regularization::RegularizedHamiltonian;
use crate::trace::ElementTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AverageMethod {
    /// `h'(∫ ∇u·∇q dt)`
    Avg1,
    /// `(1/T)∫ h'(∇u·∇q) dt`
    Avg2,
    /// `∫ h'(∇u·∇q)|∇u·∇q| dt / ∫ |∇u·∇q| dt`
    Avg3,
}

impl AverageMethod {
    pub const ALL: [AverageMethod; 3] = [AverageMethod::Avg1, AverageMethod::Avg2, AverageMethod::Avg3];

    pub fn name(self) -> &'static str {
        match self {
            AverageMethod::Avg1 => "avg1",
            AverageMethod::Avg2 => "avg2",
            AverageMethod::Avg3 => "avg3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedControl {
    pub sigma: ElementField,
    /// Elements where the weights vanished and `σ̄` was substituted.
    pub fallback: Vec<bool>,
}

/// Time-independent coefficient per element. `k` is the time step.
pub fn average_time_independent(
    trace: &ElementTrace,
    k: f64,
    reg: &RegularizedHamiltonian,
    method: AverageMethod,
) -> AveragedControl {
    let ne = trace.n_elements();
    let ns = trace.n_steps();
    let mut sigma = vec![0.0; ne];
    let mut fallback = vec![false; ne];
    for e in 0..ne {
        let column = || trace.products.iter().map(move |row| row[e]);
        sigma[e] = match method {
            AverageMethod::Avg1 => reg.h_prime(column().map(|s| k * s).sum()),
            AverageMethod::Avg2 => column().map(|s| reg.h_prime(s)).sum::<f64>() / ns as f64,
            AverageMethod::Avg3 => {
                let weight: f64 = column().map(f64::abs).sum();
                if weight > 0.0 {
                    column().map(|s| reg.h_prime(s) * s.abs()).sum::<f64>() / weight
                } else {
                    fallback[e] = true;
                    reg.bounds().sigma_bar()
                }
            }
        };
    }
    AveragedControl {
        sigma: ElementField::new(sigma),
        fallback,
    }
}

fn space_mean(grid: &SpaceGrid, row: &[f64]) -> f64 {
    row.iter().map(|s| s * grid.h()).sum::<f64>() / grid.length()
}

/// `h'((1/|Ω|)∫_Ω ∇u·∇q dx)` for every step.
pub fn average_space_independent(trace: &ElementTrace, grid: &SpaceGrid, reg: &RegularizedHamiltonian) -> Vec<f64> {
    trace
        .products
        .iter()
        .map(|row| reg.h_prime(space_mean(grid, row)))
        .collect()
}

/// `h'((1/|Ω|)∫₀ᵀ∫_Ω ∇u·∇q dx dt)`; no `1/T` factor.
pub fn average_constant(trace: &ElementTrace, grid: &SpaceGrid, k: f64, reg: &RegularizedHamiltonian) -> f64 {
    reg.h_prime(trace.products.iter().map(|row| k * space_mean(grid, row)).sum())
}
