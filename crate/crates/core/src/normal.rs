//! Standard normal quantiles.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{MteError, Result};

/// `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MteError::InvalidArgument(format!("quantile level must lie in (0, 1), got {p}")));
    }
    Ok(Normal::standard().inverse_cdf(p))
}

/// Two-sided critical value `z_{α/2} = Φ⁻¹(1 - α/2)`.
pub fn two_sided_critical(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MteError::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    normal_quantile(1.0 - 0.5 * alpha)
}
