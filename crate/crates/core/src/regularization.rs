//! Hamiltonian densities for the bang-bang control problem.
//!
//! The exact density `h(s) = max_{σ∈[σ₋,σ₊]} σ·s` is only Lipschitz, so the
//! solvers work with the tanh-smoothed family `h_δ`, whose derivative maps
//! `s = ∇u·∇q` smoothly into the open interval `(σ₋, σ₊)`.

use crate::error::{Error, Result};

/// Admissible coefficient interval `[σ₋, σ₊]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds {
    sigma_minus: f64,
    sigma_plus: f64,
}

impl ControlBounds {
    pub fn new(sigma_minus: f64, sigma_plus: f64) -> Result<Self> {
        if !(sigma_minus.is_finite() && sigma_plus.is_finite())
            || sigma_minus <= 0.0
            || sigma_minus >= sigma_plus
        {
            return Err(Error::InvalidInput(format!(
                "control bounds require 0 < sigma_minus < sigma_plus, got [{sigma_minus}, {sigma_plus}]"
            )));
        }
        Ok(Self {
            sigma_minus,
            sigma_plus,
        })
    }

    pub fn sigma_minus(&self) -> f64 {
        self.sigma_minus
    }

    pub fn sigma_plus(&self) -> f64 {
        self.sigma_plus
    }

    /// Midpoint `(σ₊+σ₋)/2`.
    pub fn sigma_bar(&self) -> f64 {
        0.5 * (self.sigma_plus + self.sigma_minus)
    }

    /// Half-width `(σ₊−σ₋)/2`.
    pub fn sigma_hat(&self) -> f64 {
        0.5 * (self.sigma_plus - self.sigma_minus)
    }

    /// Exact bang-bang density `max(σ₋·s, σ₊·s)`.
    pub fn h_exact(&self, s: f64) -> f64 {
        (self.sigma_minus * s).max(self.sigma_plus * s)
    }

    /// Density of the quadratically penalized problem: `max_{σ∈[σ₋,σ₊]} σ(s − δσ)`.
    pub fn h_tikhonov(&self, s: f64, delta: f64) -> f64 {
        let value = |sigma: f64| sigma * (s - delta * sigma);
        let interior = s / (2.0 * delta);
        if interior >= self.sigma_minus && interior <= self.sigma_plus {
            s * s / (4.0 * delta)
        } else {
            value(self.sigma_minus).max(value(self.sigma_plus))
        }
    }
}

/// `sech²(x)` without overflow for large `|x|`.
fn sech2(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// The tanh-regularized density `h_δ` and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedHamiltonian {
    bounds: ControlBounds,
    delta: f64,
}

impl RegularizedHamiltonian {
    pub fn new(bounds: ControlBounds, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "regularization delta must be positive, got {delta}"
            )));
        }
        Ok(Self { bounds, delta })
    }

    pub fn bounds(&self) -> &ControlBounds {
        &self.bounds
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.bounds, delta)
    }

    pub fn h_exact(&self, s: f64) -> f64 {
        self.bounds.h_exact(s)
    }

    /// Smoothed control law `σ̄ + σ̂·tanh(s/δ)`.
    pub fn h_prime(&self, s: f64) -> f64 {
        self.bounds.sigma_bar() + self.bounds.sigma_hat() * (s / self.delta).tanh()
    }

    /// `(σ̂/δ)·sech²(s/δ)`.
    pub fn h_second(&self, s: f64) -> f64 {
        self.bounds.sigma_hat() / self.delta * sech2(s / self.delta)
    }

    /// Primitive of [`h_prime`](Self::h_prime) anchored at `h_δ(0) = 0`,
    /// i.e. `σ̄·s + σ̂·δ·ln cosh(s/δ)`.
    ///
    /// Evaluated as `h(s)` plus a gap in `[−σ̂δ ln 2, 0]`; the final sum is
    /// rounded toward `h(s)` so the band also holds in floating point.
    pub fn h_delta(&self, s: f64) -> f64 {
        let exact = self.h_exact(s);
        let a = (s / self.delta).abs();
        let gap = self.bounds.sigma_hat()
            * self.delta
            * ((-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2);
        let value = exact + gap;
        if value - exact < gap {
            value.next_up()
        } else {
            value
        }
    }

    pub fn h_tikhonov(&self, s: f64) -> f64 {
        self.bounds.h_tikhonov(s, self.delta)
    }

    /// Control penalty equivalent to the tanh regularization,
    /// `(δ/(2σ̂))·[(σ−σ₋)ln((σ−σ₋)/σ̂) + (σ₊−σ)ln((σ₊−σ)/σ̂)]`.
    ///
    /// The endpoints are included through the limit `x ln x → 0`.
    pub fn penalty_primitive(&self, sigma: f64) -> Result<f64> {
        let lo = self.bounds.sigma_minus;
        let hi = self.bounds.sigma_plus;
        if !(lo..=hi).contains(&sigma) {
            return Err(Error::Domain(format!(
                "penalty is defined on [{lo}, {hi}], got sigma = {sigma}"
            )));
        }
        let hat = self.bounds.sigma_hat();
        let xlogx = |x: f64| if x == 0.0 { 0.0 } else { x * (x / hat).ln() };
        Ok(self.delta / (2.0 * hat) * (xlogx(sigma - lo) + xlogx(hi - sigma)))
    }
}
