//! Second moments of a normal law restricted to a half-line.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Result};

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `∫_0^∞ u² N(u; mu, sigma²) du
///   = (mu² + sigma²) Φ(mu/sigma) + mu·sigma·φ(mu/sigma)`.
pub fn truncated_normal_upper_second_moment(mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(domain("truncated moment needs finite mu and sigma > 0"));
    }
    let z = mu / sigma;
    let v = (mu * mu + sigma * sigma) * normal_cdf(z) + mu * sigma * normal_pdf(z);
    Ok(v.max(0.0))
}

/// `∫_{−∞}^0 u² N(u; mu, sigma²) du`, by reflection `u ↦ −u`.
pub fn truncated_normal_lower_second_moment(mu: f64, sigma: f64) -> Result<f64> {
    truncated_normal_upper_second_moment(-mu, sigma)
}
