//! Standard normal and chi-squared helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf;

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile. Returns ±∞ at 0 and 1.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    // one Halley step; the series inversion alone is good to about 1e-11
    let e = norm_cdf(x) - p;
    let u = e / norm_pdf(x);
    if u.is_finite() {
        x - u / (1.0 + 0.5 * x * u)
    } else {
        x
    }
}

/// Quantile of the chi-squared distribution with `df` degrees of freedom.
pub fn chi2_quantile(df: usize, p: f64) -> f64 {
    match df {
        // closed forms avoid the generic gamma inversion for the common cases
        1 => norm_quantile(0.5 + 0.5 * p).powi(2),
        2 => -2.0 * (1.0 - p).ln(),
        _ => ChiSquared::new(df as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(p),
    }
}

/// `sqrt(chi2_quantile(df, p))`, the usual distance cutoff.
pub fn chi_cutoff(df: usize, p: f64) -> f64 {
    chi2_quantile(df, p).sqrt()
}
