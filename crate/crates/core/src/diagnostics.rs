//! Sampler-quality metrics: inefficiency factors, acceptance windows and the empirical
//! dominance / diminishing-adaptation monitors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::mixture::MixtureOfNormals;

/// Shortest series accepted by [`iact`].
pub const MIN_IACT_LEN: usize = 100;

/// Integrated autocorrelation time `1 + 2 Σ ρ_k`, truncated with Geyer's initial positive
/// sequence: autocorrelations are summed in pairs `ρ_{2m} + ρ_{2m+1}` (from lag 0) until the
/// first non-positive pair. Floored at `1e-3`.
pub fn iact(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < MIN_IACT_LEN {
        return Err(invalid(format!("IACT needs at least {MIN_IACT_LEN} values, got {n}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(invalid("IACT of a non-finite series"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(c0 > 1e-300) || c0 <= 1e-24 * mean * mean {
        return Err(Error::Numerical("IACT of a constant series is undefined".into()));
    }
    let autocorr = |k: usize| -> f64 {
        let s: f64 = centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum();
        s / n as f64 / c0
    };
    let mut sum_pairs = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n / 2 {
        let pair = if m == 0 { 1.0 + autocorr(1) } else { autocorr(2 * m) + autocorr(2 * m + 1) };
        if pair <= 0.0 {
            break;
        }
        sum_pairs += pair;
        m += 1;
    }
    Ok((2.0 * sum_pairs - 1.0).max(1e-3))
}

/// Per-parameter inefficiency of one sampler run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub sampler: String,
    pub parameter_names: Vec<String>,
    pub iact: Vec<f64>,
    pub runtime_per_iteration: f64,
}

impl EfficiencyReport {
    /// Computes the IACT of every column of `draws`.
    pub fn from_draws(
        sampler: &str,
        parameter_names: Vec<String>,
        draws: &[Vec<f64>],
        runtime_per_iteration: f64,
    ) -> Result<Self> {
        let d = parameter_names.len();
        let mut iacts = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = draws
                .iter()
                .map(|x| {
                    check_dim(d, x.len())?;
                    Ok(x[j])
                })
                .collect::<Result<_>>()?;
            iacts.push(iact(&col)?);
        }
        Ok(Self { sampler: sampler.to_string(), parameter_names, iact: iacts, runtime_per_iteration })
    }

    pub fn mean_iact(&self) -> f64 {
        self.iact.iter().sum::<f64>() / self.iact.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeInefficiency {
    pub per_parameter: Vec<f64>,
    pub mean: f64,
}

/// `(IACT_B · t_B) / (IACT_A · t_A)` per parameter, and its average.
pub fn relative_inefficiency(b: &EfficiencyReport, a: &EfficiencyReport) -> Result<RelativeInefficiency> {
    if a.parameter_names != b.parameter_names {
        return Err(invalid("efficiency reports cover different parameters"));
    }
    if !(a.runtime_per_iteration > 0.0) || !(b.runtime_per_iteration > 0.0) {
        return Err(invalid("runtime per iteration must be positive"));
    }
    let per_parameter: Vec<f64> = b
        .iact
        .iter()
        .zip(&a.iact)
        .map(|(ib, ia)| (ib * b.runtime_per_iteration) / (ia * a.runtime_per_iteration))
        .collect();
    let mean = per_parameter.iter().sum::<f64>() / per_parameter.len().max(1) as f64;
    Ok(RelativeInefficiency { per_parameter, mean })
}

/// Acceptance rate over the last `min(i, width)` iterations, for every `i`.
pub fn acceptance_window(accepted: &[bool], width: usize) -> Vec<f64> {
    let width = width.max(1);
    let mut out = Vec::with_capacity(accepted.len());
    let mut count = 0usize;
    for (i, &a) in accepted.iter().enumerate() {
        count += a as usize;
        if i >= width {
            count -= accepted[i - width] as usize;
        }
        out.push(count as f64 / (i + 1).min(width) as f64);
    }
    out
}

/// Sample skewness `m₃ / m₂^{3/2}`; `None` for a constant series.
pub fn skewness(series: &[f64]) -> Option<f64> {
    let n = series.len() as f64;
    if series.is_empty() {
        return None;
    }
    let mean = series.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in series {
        let c = v - mean;
        m2 += c * c;
        m3 += c * c * c;
    }
    m2 /= n;
    m3 /= n;
    if !(m2 > 1e-300) || m2 <= 1e-24 * mean * mean {
        return None;
    }
    Some(m3 / m2.powf(1.5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceSummary {
    pub max_ratio: f64,
    /// 10%, 20%, ..., 90% quantiles of the ratio.
    pub deciles: Vec<f64>,
}

fn test_points<R: Rng + ?Sized>(g0: &MixtureOfNormals, n: usize, rng: &mut R) -> Vec<(Vec<f64>, f64)> {
    (0..n)
        .map(|_| {
            let z = g0.sample(rng);
            let lg0 = g0.log_density_unchecked(z.as_slice());
            (z.as_slice().to_vec(), lg0)
        })
        .collect()
}

/// Ratio `ḡ(z) / g₀(z)` over `n_points` draws from `g₀`: its maximum and deciles.
pub fn dominance_monitor<R: Rng + ?Sized>(
    gbar: &MixtureOfNormals,
    g0: &MixtureOfNormals,
    n_points: usize,
    rng: &mut R,
) -> Result<DominanceSummary> {
    check_dim(g0.dimension(), gbar.dimension())?;
    if n_points == 0 {
        return Err(invalid("dominance monitor needs at least one test point"));
    }
    let mut ratios: Vec<f64> = test_points(g0, n_points, rng)
        .iter()
        .map(|(z, lg0)| (gbar.log_density_unchecked(z) - lg0).exp())
        .collect();
    ratios.sort_by(f64::total_cmp);
    let max_ratio = *ratios.last().unwrap();
    let deciles = (1..10)
        .map(|k| {
            let pos = k as f64 / 10.0 * (ratios.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            ratios[lo] + (pos - lo as f64) * (ratios[hi] - ratios[lo])
        })
        .collect();
    Ok(DominanceSummary { max_ratio, deciles })
}

/// `sup |ḡ_prev(z) − ḡ_next(z)| / g₀(z)` over `n_points` draws from `g₀`.
pub fn diminishing_monitor<R: Rng + ?Sized>(
    gbar_prev: &MixtureOfNormals,
    gbar_next: &MixtureOfNormals,
    g0: &MixtureOfNormals,
    n_points: usize,
    rng: &mut R,
) -> Result<f64> {
    check_dim(g0.dimension(), gbar_prev.dimension())?;
    check_dim(g0.dimension(), gbar_next.dimension())?;
    if n_points == 0 {
        return Err(invalid("diminishing monitor needs at least one test point"));
    }
    Ok(test_points(g0, n_points, rng)
        .iter()
        .map(|(z, lg0)| {
            let a = (gbar_prev.log_density_unchecked(z) - lg0).exp();
            let b = (gbar_next.log_density_unchecked(z) - lg0).exp();
            (a - b).abs()
        })
        .fold(0.0, f64::max))
}

/// Ordinary least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn trend_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let xbar = (n - 1.0) / 2.0;
    let ybar = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xbar;
        sxy += dx * (y - ybar);
        sxx += dx * dx;
    }
    sxy / sxx
}
