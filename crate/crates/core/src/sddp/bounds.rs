use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal quantile `Φ⁻¹(p)` for `0 < p < 1`.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must lie in (0, 1)");
    Normal::standard().inverse_cdf(p)
}

/// `z_{α/2}`, the upper `α/2` quantile; zero at `α = 1`.
pub fn z_half_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::input(format!(
            "confidence level α = {alpha} must lie in (0, 1]"
        )));
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    Ok(normal_quantile(1.0 - alpha / 2.0))
}

/// Sample mean, sample standard deviation, and `μ̂ + z_{α/2} σ̂ / √M`.
pub fn statistical_upper_bound(costs: &[f64], alpha: f64) -> Result<(f64, f64, f64)> {
    let m = costs.len();
    if m < 2 {
        return Err(Error::input(
            "the statistical upper bound needs at least two forward samples",
        ));
    }
    let mean = costs.iter().sum::<f64>() / m as f64;
    let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let std = var.sqrt();
    let ub = mean + z_half_alpha(alpha)? * std / (m as f64).sqrt();
    Ok((mean, std, ub))
}
