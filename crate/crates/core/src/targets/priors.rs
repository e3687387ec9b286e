//! Priors on variances, expressed as densities of the log-variance (Jacobian included).

use std::f64::consts::PI;

/// Log density of `x = ln s` when `s ~ InverseGamma(1, b)` with `b = 2 · mode`.
pub fn inverse_gamma_log_density_log_scale(x: f64, mode: f64) -> f64 {
    let b = 2.0 * mode;
    b.ln() - x - b * (-x).exp()
}

/// Log density of `x = ln s` when `s ~ LogNormal(mu, sd²)`, i.e. `x ~ N(mu, sd²)`.
pub fn log_normal_log_density_log_scale(x: f64, mu: f64, sd: f64) -> f64 {
    -0.5 * (2.0 * PI * sd * sd).ln() - 0.5 * ((x - mu) / sd).powi(2)
}
