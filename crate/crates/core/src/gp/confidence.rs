use serde::{Deserialize, Serialize};

use super::GpState;
use crate::error::{Error, Result};

/// Pointwise confidence band `μ_t(x) ± (B + β)σ_t(x)` with
/// `β = (R/λ)·√(2 log(1/δ))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    /// RKHS norm bound.
    pub b: f64,
    /// Sub-Gaussian noise parameter.
    pub r: f64,
    pub delta: f64,
    pub beta: f64,
}

impl ConfidenceBand {
    pub fn new(b: f64, r: f64, delta: f64, lambda: f64) -> Result<Self> {
        if !(b >= 0.0) || !(r >= 0.0) || !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "band needs B >= 0, R >= 0, lambda > 0 (got {b}, {r}, {lambda})"
            )));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1], got {delta}"
            )));
        }
        let beta = r / lambda * (2.0 * (1.0 / delta).ln()).sqrt();
        Ok(ConfidenceBand { b, r, delta, beta })
    }

    pub fn width_factor(&self) -> f64 {
        self.b + self.beta
    }
}

/// Returns `(L, U)` at `x`.
pub fn confidence_bounds(state: &GpState, band: &ConfidenceBand, x: &[f64]) -> Result<(f64, f64)> {
    let mu = state.posterior_mean(x)?;
    let half = band.width_factor() * state.posterior_std(x)?;
    Ok((mu - half, mu + half))
}
