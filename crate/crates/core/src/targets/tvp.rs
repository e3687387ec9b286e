//! Time-varying parameter AR(1):
//! `y_t = c_t + ρ_t y_{t−1} + σ ε_t`, `c_t = c_{t−1} + λ₀ σ u_t`, `ρ_t = ρ_{t−1} + λ₁ v_t`.
//!
//! `(c, ρ)` are filtered as states; the parameters are `θ = (ln σ², ln λ₀², ln λ₁²)`.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::priors::inverse_gamma_log_density_log_scale;
use super::TargetModel;
use crate::error::{invalid, Result};

/// Prior variance of each initial state `c₀`, `ρ₀`.
pub const INITIAL_STATE_VARIANCE: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct TvpAr1Model {
    y: Vec<f64>,
    sigma2_ols: f64,
    prior_modes: [f64; 3],
    initial_state_variance: f64,
}

/// Kalman-filter log likelihood of observations `2..T` given the variances.
///
/// Returns `None` when the recursion stops being finite.
pub fn kalman_loglik_variances(
    y: &[f64],
    sigma2: f64,
    lambda0_sq: f64,
    lambda1_sq: f64,
    initial_state_variance: f64,
) -> Option<f64> {
    let qc = lambda0_sq * sigma2;
    let qr = lambda1_sq;
    let mut a = [0.0f64, 0.0];
    // P = [[p00, p01], [p01, p11]]
    let (mut p00, mut p01, mut p11) = (initial_state_variance, 0.0, initial_state_variance);
    let mut ll = 0.0;
    for t in 1..y.len() {
        p00 += qc;
        p11 += qr;
        let x = y[t - 1];
        // P h with h = (1, x)
        let ph0 = p00 + p01 * x;
        let ph1 = p01 + p11 * x;
        let f = ph0 + x * ph1 + sigma2;
        if !(f > 0.0) || !f.is_finite() {
            return None;
        }
        let v = y[t] - a[0] - a[1] * x;
        ll -= 0.5 * ((2.0 * PI).ln() + f.ln() + v * v / f);
        let k0 = ph0 / f;
        let k1 = ph1 / f;
        a[0] += k0 * v;
        a[1] += k1 * v;
        p00 -= k0 * ph0;
        p01 -= 0.5 * (k0 * ph1 + k1 * ph0);
        p11 -= k1 * ph1;
        // keep P positive semidefinite under rounding
        p00 = p00.max(0.0);
        p11 = p11.max(0.0);
        let bound = (p00 * p11).sqrt();
        p01 = p01.clamp(-bound, bound);
    }
    ll.is_finite().then_some(ll)
}

/// Log likelihood at `θ = (ln σ², ln λ₀², ln λ₁²)`; `-inf` when the filter overflows.
pub fn kalman_loglik(model: &TvpAr1Model, theta: &DVector<f64>) -> f64 {
    if theta.len() != 3 || theta.iter().any(|v| !v.is_finite()) {
        return f64::NEG_INFINITY;
    }
    kalman_loglik_variances(
        &model.y,
        theta[0].exp(),
        theta[1].exp(),
        theta[2].exp(),
        model.initial_state_variance,
    )
    .unwrap_or(f64::NEG_INFINITY)
}

/// Intercept, slope and residual variance `RSS / (n − 2)` of the OLS AR(1) fit.
pub fn ols_ar1(y: &[f64]) -> Result<(f64, f64, f64)> {
    if y.len() < 4 {
        return Err(invalid("AR(1) fit needs at least 4 observations"));
    }
    let x = &y[..y.len() - 1];
    let z = &y[1..];
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let mz = z.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxz: f64 = x.iter().zip(z).map(|(a, b)| (a - mx) * (b - mz)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("constant series has no AR(1) fit"));
    }
    let rho = sxz / sxx;
    let c = mz - rho * mx;
    let rss: f64 = x.iter().zip(z).map(|(a, b)| (b - c - rho * a).powi(2)).sum();
    Ok((c, rho, rss / (n - 2.0)))
}

impl TvpAr1Model {
    /// Model for `y` with inverse-gamma priors whose modes are `σ²_OLS`, `0.01 σ²_OLS` and
    /// `0.001²`.
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("series contains non-finite values"));
        }
        let (_, _, sigma2_ols) = ols_ar1(&y)?;
        if !(sigma2_ols > 0.0) {
            return Err(invalid("OLS residual variance is zero"));
        }
        Ok(Self {
            y,
            sigma2_ols,
            prior_modes: [sigma2_ols, 0.01 * sigma2_ols, 0.001 * 0.001],
            initial_state_variance: INITIAL_STATE_VARIANCE,
        })
    }

    pub fn with_initial_state_variance(mut self, v: f64) -> Self {
        self.initial_state_variance = v;
        self
    }

    pub fn series(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma2_ols(&self) -> f64 {
        self.sigma2_ols
    }

    pub fn prior_modes(&self) -> [f64; 3] {
        self.prior_modes
    }

    pub fn log_prior(&self, theta: &DVector<f64>) -> f64 {
        (0..3).map(|i| inverse_gamma_log_density_log_scale(theta[i], self.prior_modes[i])).sum()
    }
}

impl TargetModel for TvpAr1Model {
    fn dimension(&self) -> usize {
        3
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        let ll = kalman_loglik(self, theta);
        if ll == f64::NEG_INFINITY {
            return ll;
        }
        let lp = ll + self.log_prior(theta);
        if lp.is_nan() { f64::NEG_INFINITY } else { lp }
    }

    fn parameter_names(&self) -> Vec<String> {
        vec!["ln_sigma2".into(), "ln_lambda0_sq".into(), "ln_lambda1_sq".into()]
    }

    fn laplace_start(&self) -> Option<DVector<f64>> {
        Some(DVector::from_iterator(3, self.prior_modes.iter().map(|m| m.ln())))
    }
}

/// Simulated TVP-AR(1) series together with its state paths.
#[derive(Debug, Clone, PartialEq)]
pub struct TvpSeries {
    pub y: Vec<f64>,
    pub c: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Simulates `t_len` observations forward from `(c₀, ρ₀)`, starting at the stationary mean
/// `c₀ / (1 − ρ₀)` when `|ρ₀| < 1` and at 0 otherwise.
pub fn tvp_synthetic(
    t_len: usize,
    sigma2: f64,
    lambda0_sq: f64,
    lambda1_sq: f64,
    c0: f64,
    rho0: f64,
    seed: u64,
) -> Result<TvpSeries> {
    if t_len < 10 {
        return Err(invalid("synthetic TVP series needs T >= 10"));
    }
    if !(sigma2 > 0.0) || lambda0_sq < 0.0 || lambda1_sq < 0.0 {
        return Err(invalid("variances must be non-negative with sigma2 > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = sigma2.sqrt();
    let (l0, l1) = (lambda0_sq.sqrt(), lambda1_sq.sqrt());
    let mut c = c0;
    let mut rho = rho0;
    let mut prev = if rho0.abs() < 1.0 { c0 / (1.0 - rho0) } else { 0.0 };
    let mut out = TvpSeries { y: Vec::with_capacity(t_len), c: Vec::with_capacity(t_len), rho: Vec::with_capacity(t_len) };
    for _ in 0..t_len {
        let (e, u, v): (f64, f64, f64) =
            (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        c += l0 * sigma * u;
        rho += l1 * v;
        let y = c + rho * prev + sigma * e;
        out.y.push(y);
        out.c.push(c);
        out.rho.push(rho);
        prev = y;
    }
    Ok(out)
}
