//! Mixture-of-normals estimation by k-harmonic means (KHM) clustering.
//!
//! KHM replaces the hard assignments of k-means with soft memberships `m(c_i | θ)` and a
//! per-point weight `w(θ)` that favours points far from every center. Centers are found by
//! fixed-point iteration; component covariances and weights are computed once from the
//! converged memberships, and the number of components is chosen by BIC.
//!
//! Distances are computed after a linear whitening of the data chosen by
//! [`DistanceMetric`]; all public inputs and outputs are in the original coordinates.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;

use crate::error::{check_dim, invalid, Result};
use crate::linalg::{cholesky_lower, floor_eigenvalues, is_well_conditioned_spd, sample_mean_cov};
use crate::mixture::{GaussianComponent, MixtureOfNormals};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceMetric {
    /// Plain Euclidean distance on the raw coordinates.
    Euclidean,
    /// Euclidean distance after dividing each coordinate by its sample standard deviation.
    StandardizedEuclidean,
    /// Mahalanobis distance under the sample covariance of the data.
    Mahalanobis,
}

/// How the distance exponent of the membership and weight functions is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentPolicy {
    /// Exponent equal to the number of clusters, floored at 2.
    ClusterCount,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KhmConfig {
    pub max_components: usize,
    pub distance_floor: f64,
    pub max_iterations: usize,
    pub center_move_tolerance: f64,
    pub distance_metric: DistanceMetric,
    pub exponent_policy: ExponentPolicy,
    /// Number of random subsamples in the Bradley-Fayyad initialization.
    pub init_subsamples: usize,
    /// Fraction of the data in each initialization subsample.
    pub init_fraction: f64,
    /// EM steps (weights and means only) applied after KHM; 0 disables refinement.
    pub em_refine_steps: usize,
}

impl Default for KhmConfig {
    fn default() -> Self {
        Self {
            max_components: 5,
            distance_floor: 1e-8,
            max_iterations: 200,
            center_move_tolerance: 1e-6,
            distance_metric: DistanceMetric::StandardizedEuclidean,
            exponent_policy: ExponentPolicy::ClusterCount,
            init_subsamples: 10,
            init_fraction: 0.1,
            em_refine_steps: 0,
        }
    }
}

impl KhmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_components < 1 {
            return Err(invalid("max_components must be at least 1"));
        }
        if !(self.distance_floor > 0.0) {
            return Err(invalid("distance_floor must be positive"));
        }
        if !(self.center_move_tolerance > 0.0) {
            return Err(invalid("center_move_tolerance must be positive"));
        }
        if self.max_iterations == 0 || self.init_subsamples == 0 {
            return Err(invalid("iteration and subsample counts must be positive"));
        }
        if !(self.init_fraction > 0.0 && self.init_fraction <= 1.0) {
            return Err(invalid("init_fraction must lie in (0, 1]"));
        }
        if let ExponentPolicy::Fixed(e) = self.exponent_policy {
            if !(e > 0.0) {
                return Err(invalid("fixed KHM exponent must be positive"));
            }
        }
        Ok(())
    }

    /// Distance exponent used with `clusters` centers.
    pub fn exponent(&self, clusters: usize) -> f64 {
        match self.exponent_policy {
            ExponentPolicy::ClusterCount => (clusters as f64).max(2.0),
            ExponentPolicy::Fixed(e) => e,
        }
    }
}

/// Result of clustering a batch of draws.
#[derive(Debug, Clone)]
pub struct ClusterFit {
    pub centers: Vec<DVector<f64>>,
    pub mixture: MixtureOfNormals,
    pub bic: f64,
    pub iterations_used: usize,
    pub degenerate_repairs: usize,
    /// `(component count, BIC)` of every candidate that was fitted.
    pub candidates: Vec<(usize, f64)>,
}

/// One synchronous center update.
#[derive(Debug, Clone)]
pub struct KhmStep {
    pub centers: Vec<DVector<f64>>,
    /// Centers whose accumulated weight vanished and were left in place.
    pub stalled: Vec<usize>,
}

/// Weight `w(θ)` and memberships `m(c_i | θ)` of one point.
pub fn khm_scores(
    point: &DVector<f64>,
    centers: &[DVector<f64>],
    exponent: f64,
    floor: f64,
) -> Result<(f64, Vec<f64>)> {
    if centers.is_empty() {
        return Err(invalid("khm_scores needs at least one center"));
    }
    for c in centers {
        check_dim(point.len(), c.len())?;
    }
    let dists: Vec<f64> = centers.iter().map(|c| (point - c).norm().max(floor)).collect();
    let mut memberships = vec![0.0; centers.len()];
    let w = scores_from_distances(&dists, exponent, &mut memberships);
    Ok((w, memberships))
}

/// `x^e`, through `powi` when `e` is a small integer.
#[inline]
fn pow_e(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 64.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Fills `memberships` and returns the weight, working with ratios `d_min / d_i` so that
/// nothing overflows at the distance floor.
fn scores_from_distances(dists: &[f64], e: f64, memberships: &mut [f64]) -> f64 {
    let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut s_e = 0.0;
    let mut s_e2 = 0.0;
    for (m, &d) in memberships.iter_mut().zip(dists) {
        let r = dmin / d;
        let re = pow_e(r, e);
        let re2 = re * r * r;
        s_e += re;
        s_e2 += re2;
        *m = re2;
    }
    for m in memberships.iter_mut() {
        *m /= s_e2;
    }
    pow_e(dmin, e - 2.0) * s_e2 / (s_e * s_e)
}

/// Row-major point cloud in whitened coordinates.
#[derive(Debug, Clone)]
struct Points {
    d: usize,
    flat: Vec<f64>,
}

impl Points {
    fn n(&self) -> usize {
        self.flat.len().checked_div(self.d).unwrap_or(0)
    }

    fn row(&self, t: usize) -> &[f64] {
        &self.flat[t * self.d..(t + 1) * self.d]
    }

    fn subset(&self, idx: &[usize]) -> Points {
        let mut flat = Vec::with_capacity(idx.len() * self.d);
        for &t in idx {
            flat.extend_from_slice(self.row(t));
        }
        Points { d: self.d, flat }
    }

    fn from_rows(d: usize, rows: &[Vec<f64>]) -> Points {
        Points { d, flat: rows.iter().flat_map(|r| r.iter().cloned()).collect() }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Linear whitening `x ↦ A x` defining the clustering metric.
#[derive(Debug, Clone)]
struct Whitening {
    forward: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl Whitening {
    fn new(data: &[DVector<f64>], metric: DistanceMetric) -> Whitening {
        let d = data[0].len();
        match metric {
            DistanceMetric::Euclidean => {
                Whitening { forward: DMatrix::identity(d, d), inverse: DMatrix::identity(d, d) }
            }
            DistanceMetric::StandardizedEuclidean => {
                let (_, cov) = sample_mean_cov(data);
                let sd: Vec<f64> = (0..d)
                    .map(|i| {
                        let s = cov[(i, i)].max(0.0).sqrt();
                        if s > 0.0 && s.is_finite() { s } else { 1.0 }
                    })
                    .collect();
                Whitening {
                    forward: DMatrix::from_diagonal(&DVector::from_iterator(d, sd.iter().map(|s| 1.0 / s))),
                    inverse: DMatrix::from_diagonal(&DVector::from_vec(sd)),
                }
            }
            DistanceMetric::Mahalanobis => {
                let (_, cov) = sample_mean_cov(data);
                let cov = if is_well_conditioned_spd(&cov) {
                    cov
                } else {
                    floor_eigenvalues(&cov, 1e-8, 1e-12)
                };
                match cholesky_lower(&cov).and_then(|l| l.clone().try_inverse().map(|li| (l, li))) {
                    Some((l, li)) => Whitening { forward: li, inverse: l },
                    None => Whitening::new(data, DistanceMetric::StandardizedEuclidean),
                }
            }
        }
    }

    fn apply_all(&self, data: &[DVector<f64>]) -> Points {
        let d = self.forward.nrows();
        let mut flat = Vec::with_capacity(data.len() * d);
        for x in data {
            flat.extend((&self.forward * x).iter());
        }
        Points { d, flat }
    }

    fn to_white(&self, c: &DVector<f64>) -> Vec<f64> {
        (&self.forward * c).iter().cloned().collect()
    }

    fn to_original(&self, c: &[f64]) -> DVector<f64> {
        &self.inverse * DVector::from_column_slice(c)
    }
}

/// One synchronous update in whitened space. Returns the largest center displacement.
fn update_centers(
    pts: &Points,
    centers: &mut [Vec<f64>],
    e: f64,
    floor: f64,
    stalled: &mut Vec<usize>,
) -> f64 {
    let p = centers.len();
    let d = pts.d;
    let mut num = vec![0.0; p * d];
    let mut den = vec![0.0; p];
    let mut dists = vec![0.0; p];
    let mut mw = vec![0.0; p];
    for t in 0..pts.n() {
        let x = pts.row(t);
        for (di, c) in dists.iter_mut().zip(centers.iter()) {
            *di = dist(x, c).max(floor);
        }
        membership_weight_products(&dists, e, &mut mw);
        for i in 0..p {
            den[i] += mw[i];
            let row = &mut num[i * d..(i + 1) * d];
            for (acc, &xv) in row.iter_mut().zip(x) {
                *acc += mw[i] * xv;
            }
        }
    }
    stalled.clear();
    let mut max_move: f64 = 0.0;
    for i in 0..p {
        if !(den[i] > 0.0) || !den[i].is_finite() {
            stalled.push(i);
            continue;
        }
        let new: Vec<f64> = num[i * d..(i + 1) * d].iter().map(|v| v / den[i]).collect();
        max_move = max_move.max(dist(&new, &centers[i]));
        centers[i] = new;
    }
    max_move
}

/// `m(c_i|θ) · w(θ) = d_i^{-e-2} / (Σ_j d_j^{-e})²`, computed in scaled form.
fn membership_weight_products(dists: &[f64], e: f64, out: &mut [f64]) {
    let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut s_e = 0.0;
    for (o, &d) in out.iter_mut().zip(dists) {
        let r = dmin / d;
        let re = pow_e(r, e);
        s_e += re;
        *o = re * r * r;
    }
    let scale = pow_e(dmin, e - 2.0) / (s_e * s_e);
    for o in out.iter_mut() {
        *o *= scale;
    }
}

/// Harmonic-mean performance `Σ_t p / Σ_i d_{ti}^{-e}`; smaller is better.
fn khm_objective(pts: &Points, centers: &[Vec<f64>], e: f64, floor: f64) -> f64 {
    let p = centers.len() as f64;
    let mut total = 0.0;
    for t in 0..pts.n() {
        let x = pts.row(t);
        let dists: Vec<f64> = centers.iter().map(|c| dist(x, c).max(floor)).collect();
        let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
        let s: f64 = dists.iter().map(|d| pow_e(dmin / d, e)).sum();
        total += p * pow_e(dmin, e) / s;
    }
    total
}

/// Iterates to convergence; returns the number of iterations used.
fn run_khm(pts: &Points, centers: &mut [Vec<f64>], e: f64, cfg: &KhmConfig) -> usize {
    let mut stalled = Vec::new();
    for it in 1..=cfg.max_iterations {
        let moved = update_centers(pts, centers, e, cfg.distance_floor, &mut stalled);
        if moved < cfg.center_move_tolerance {
            return it;
        }
    }
    cfg.max_iterations
}

/// One synchronous KHM center update on `data`, using the metric of `cfg` and the scores
/// of the pre-update centers.
pub fn khm_iterate(
    data: &[DVector<f64>],
    centers: &[DVector<f64>],
    cfg: &KhmConfig,
) -> Result<KhmStep> {
    if data.is_empty() {
        return Err(invalid("khm_iterate needs data"));
    }
    if centers.is_empty() {
        return Err(invalid("khm_iterate needs at least one center"));
    }
    let d = data[0].len();
    for x in data.iter().chain(centers) {
        check_dim(d, x.len())?;
    }
    let wh = Whitening::new(data, cfg.distance_metric);
    let pts = wh.apply_all(data);
    let mut cs: Vec<Vec<f64>> = centers.iter().map(|c| wh.to_white(c)).collect();
    let mut stalled = Vec::new();
    update_centers(&pts, &mut cs, cfg.exponent(centers.len()), cfg.distance_floor, &mut stalled);
    let mut out: Vec<DVector<f64>> = cs.iter().map(|c| wh.to_original(c)).collect();
    // stalled centers keep their exact input value, not a round trip through the whitening
    for &i in &stalled {
        out[i] = centers[i].clone();
    }
    Ok(KhmStep { centers: out, stalled })
}

/// Runs KHM from `centers` until the largest center move falls below the tolerance.
pub fn khm_converge(
    data: &[DVector<f64>],
    centers: &[DVector<f64>],
    cfg: &KhmConfig,
) -> Result<(Vec<DVector<f64>>, usize)> {
    if data.is_empty() || centers.is_empty() {
        return Err(invalid("khm_converge needs data and centers"));
    }
    let wh = Whitening::new(data, cfg.distance_metric);
    let pts = wh.apply_all(data);
    let mut cs: Vec<Vec<f64>> = centers.iter().map(|c| wh.to_white(c)).collect();
    let iters = run_khm(&pts, &mut cs, cfg.exponent(centers.len()), cfg);
    Ok((cs.iter().map(|c| wh.to_original(c)).collect(), iters))
}

fn bf_init_white<R: Rng + ?Sized>(pts: &Points, p: usize, cfg: &KhmConfig, rng: &mut R) -> Vec<Vec<f64>> {
    let n = pts.n();
    let e = cfg.exponent(p);
    let size = ((cfg.init_fraction * n as f64).ceil() as usize).max(p).min(n);
    let mut solutions: Vec<Vec<Vec<f64>>> = Vec::with_capacity(cfg.init_subsamples);
    for _ in 0..cfg.init_subsamples {
        let sub = if size == n {
            pts.clone()
        } else {
            let mut idx = index::sample(rng, n, size).into_vec();
            idx.sort_unstable();
            pts.subset(&idx)
        };
        let starts = index::sample(rng, sub.n(), p).into_vec();
        let mut centers: Vec<Vec<f64>> = starts.iter().map(|&t| sub.row(t).to_vec()).collect();
        run_khm(&sub, &mut centers, e, cfg);
        solutions.push(centers);
    }
    let pooled_rows: Vec<Vec<f64>> = solutions.iter().flatten().cloned().collect();
    let pool = Points::from_rows(pts.d, &pooled_rows);
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for start in &solutions {
        let mut centers = start.clone();
        run_khm(&pool, &mut centers, e, cfg);
        let obj = khm_objective(&pool, &centers, e, cfg.distance_floor);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, centers));
        }
    }
    best.map(|(_, c)| c).unwrap_or_default()
}

/// Bradley-Fayyad refinement with KHM in place of k-means: cluster random subsamples,
/// pool their centers, and keep the subsample solution that clusters the pool best.
pub fn bradley_fayyad_init<R: Rng + ?Sized>(
    data: &[DVector<f64>],
    p: usize,
    cfg: &KhmConfig,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    cfg.validate()?;
    if p == 0 {
        return Err(invalid("need at least one center"));
    }
    if data.len() < p {
        return Err(invalid(format!("{} points cannot seed {p} centers", data.len())));
    }
    let wh = Whitening::new(data, cfg.distance_metric);
    let pts = wh.apply_all(data);
    Ok(bf_init_white(&pts, p, cfg, rng).iter().map(|c| wh.to_original(c)).collect())
}

/// Replacement covariance for a degenerate component: `0.5² · Var(θ)` of the full data,
/// pushed to SPD by adding `floor · I` when needed.
pub fn repair_degenerate(data: &[DVector<f64>], floor: f64) -> DMatrix<f64> {
    let d = data.first().map_or(1, |x| x.len());
    let (_, var) = if data.len() > 1 { sample_mean_cov(data) } else { (DVector::zeros(d), DMatrix::zeros(d, d)) };
    let mut out = var * 0.25;
    let mut bump = floor;
    while cholesky_lower(&out).is_none() {
        out += DMatrix::identity(d, d) * bump;
        bump *= 10.0;
    }
    out
}

fn estimate_white(
    data: &[DVector<f64>],
    pts: &Points,
    centers_white: &[Vec<f64>],
    wh: &Whitening,
    cfg: &KhmConfig,
) -> Result<(MixtureOfNormals, usize)> {
    let p = centers_white.len();
    let d = pts.d;
    let e = cfg.exponent(p);
    let centers: Vec<DVector<f64>> = centers_white.iter().map(|c| wh.to_original(c)).collect();
    let mut mass = vec![0.0; p];
    let mut covs = vec![DMatrix::<f64>::zeros(d, d); p];
    let mut dists = vec![0.0; p];
    let mut mw = vec![0.0; p];
    for (t, x) in data.iter().enumerate() {
        let xw = pts.row(t);
        for (di, c) in dists.iter_mut().zip(centers_white) {
            *di = dist(xw, c).max(cfg.distance_floor);
        }
        membership_weight_products(&dists, e, &mut mw);
        for i in 0..p {
            mass[i] += mw[i];
            let diff = x - &centers[i];
            covs[i].ger(mw[i], &diff, &diff, 1.0);
        }
    }
    let mut repairs = 0;
    let mut comps = Vec::with_capacity(p);
    let total: f64 = mass.iter().sum();
    for i in 0..p {
        let mut v = if mass[i] > 0.0 { &covs[i] / mass[i] } else { DMatrix::zeros(d, d) };
        v = (&v + v.transpose()) * 0.5;
        if !is_well_conditioned_spd(&v) {
            v = repair_degenerate(data, cfg.distance_floor);
            repairs += 1;
        }
        let w = if total > 0.0 && mass[i] > 0.0 { mass[i] / total } else { 1e-12 };
        comps.push(GaussianComponent::new(w.max(1e-300), centers[i].clone(), v)?);
    }
    Ok((MixtureOfNormals::from_unnormalized(comps)?, repairs))
}

/// Component means at `centers`, covariances and weights from the converged
/// membership-weight products. Returns the mixture and the number of repaired covariances.
pub fn estimate_mixture_params(
    data: &[DVector<f64>],
    centers: &[DVector<f64>],
    cfg: &KhmConfig,
) -> Result<(MixtureOfNormals, usize)> {
    if data.is_empty() || centers.is_empty() {
        return Err(invalid("estimate_mixture_params needs data and centers"));
    }
    let wh = Whitening::new(data, cfg.distance_metric);
    let pts = wh.apply_all(data);
    let cw: Vec<Vec<f64>> = centers.iter().map(|c| wh.to_white(c)).collect();
    estimate_white(data, &pts, &cw, &wh, cfg)
}

/// A few EM steps that update weights and means with covariances held fixed.
pub fn em_refine(data: &[DVector<f64>], mixture: &MixtureOfNormals, steps: usize) -> Result<MixtureOfNormals> {
    let mut mix = mixture.clone();
    for _ in 0..steps {
        let p = mix.len();
        let d = mix.dimension();
        let mut mass = vec![0.0; p];
        let mut sums = vec![DVector::<f64>::zeros(d); p];
        for x in data {
            let r = mix.responsibilities(x)?;
            for i in 0..p {
                mass[i] += r[i];
                sums[i].axpy(r[i], x, 1.0);
            }
        }
        let comps = mix
            .components()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if mass[i] > 1e-12 {
                    GaussianComponent::new(mass[i] / data.len() as f64, &sums[i] / mass[i], c.covariance().clone())
                } else {
                    GaussianComponent::new(1e-12, c.mean().clone(), c.covariance().clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        mix = MixtureOfNormals::from_unnormalized(comps)?;
    }
    Ok(mix)
}

/// `−2 log L + k ln n` with `k = p − 1 + p d + p d (d + 1) / 2`.
pub fn bic(data: &[DVector<f64>], mixture: &MixtureOfNormals) -> f64 {
    let n = data.len() as f64;
    let p = mixture.len() as f64;
    let d = mixture.dimension() as f64;
    let loglik: f64 = data.iter().map(|x| mixture.log_density_unchecked(x.as_slice())).sum();
    let k = p - 1.0 + p * d + p * d * (d + 1.0) / 2.0;
    -2.0 * loglik + k * n.ln()
}

/// Single full-covariance normal fitted by sample moments.
pub fn fit_single_normal(data: &[DVector<f64>], floor: f64) -> Result<MixtureOfNormals> {
    let (mean, mut cov) = sample_mean_cov(data);
    if data.len() < 2 || !is_well_conditioned_spd(&cov) {
        cov = repair_degenerate(data, floor) * 4.0;
        if !is_well_conditioned_spd(&cov) {
            cov = floor_eigenvalues(&cov, 1e-8, floor);
        }
    }
    MixtureOfNormals::single(mean, cov)
}

/// Fits mixtures with 1..=`max_components` components and returns the BIC minimizer.
pub fn fit_with_bic<R: Rng + ?Sized>(data: &[DVector<f64>], cfg: &KhmConfig, rng: &mut R) -> Result<ClusterFit> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(invalid("fit_with_bic needs data"));
    }
    let d = data[0].len();
    for x in data {
        check_dim(d, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite draw in clustering input"));
        }
    }
    if data.len() < 2 * d {
        let mixture = fit_single_normal(data, cfg.distance_floor)?;
        let score = bic(data, &mixture);
        return Ok(ClusterFit {
            centers: vec![mixture.components()[0].mean().clone()],
            mixture,
            bic: score,
            iterations_used: 0,
            degenerate_repairs: 0,
            candidates: vec![(1, score)],
        });
    }
    let wh = Whitening::new(data, cfg.distance_metric);
    let pts = wh.apply_all(data);
    let mut best: Option<ClusterFit> = None;
    let mut candidates = Vec::new();
    for p in 1..=cfg.max_components.min(data.len()) {
        let mut centers = bf_init_white(&pts, p, cfg, rng);
        let iterations = run_khm(&pts, &mut centers, cfg.exponent(p), cfg);
        let (mut mixture, repairs) = estimate_white(data, &pts, &centers, &wh, cfg)?;
        if cfg.em_refine_steps > 0 {
            mixture = em_refine(data, &mixture, cfg.em_refine_steps)?;
        }
        let score = bic(data, &mixture);
        if !score.is_finite() {
            continue;
        }
        candidates.push((p, score));
        if best.as_ref().is_none_or(|b| score < b.bic) {
            best = Some(ClusterFit {
                centers: mixture.components().iter().map(|c| c.mean().clone()).collect(),
                mixture,
                bic: score,
                iterations_used: iterations,
                degenerate_repairs: repairs,
                candidates: Vec::new(),
            });
        }
    }
    let mut fit = match best {
        Some(f) => f,
        None => {
            let mixture = fit_single_normal(data, cfg.distance_floor)?;
            let score = bic(data, &mixture);
            ClusterFit {
                centers: vec![mixture.components()[0].mean().clone()],
                mixture,
                bic: score,
                iterations_used: 0,
                degenerate_repairs: 0,
                candidates: Vec::new(),
            }
        }
    };
    fit.candidates = candidates;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn blobs(means: &[[f64; 2]], per: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for m in means {
            for _ in 0..per {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                out.push(v(&[m[0] + a, m[1] + b]));
            }
        }
        out
    }

    #[test]
    fn equidistant_point_has_uniform_memberships() {
        let centers = vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.0, -1.0])];
        let (w, m) = khm_scores(&v(&[0.0, 0.0]), &centers, 4.0, 1e-8).unwrap();
        assert!(w > 0.0 && w.is_finite());
        for mi in m {
            assert!((mi - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_center_scores_by_substitution() {
        let r: f64 = 2.5;
        let (w, m) = khm_scores(&v(&[r]), &[v(&[0.0])], 1.0, 1e-8).unwrap();
        let oracle = r.powi(-3) / (r.powi(-1)).powi(2);
        assert!((w - oracle).abs() < 1e-14);
        assert!((w - 1.0 / r).abs() < 1e-14);
        assert_eq!(m, vec![1.0]);
    }

    #[test]
    fn two_center_memberships_by_formula() {
        let (_, m) = khm_scores(&v(&[0.0]), &[v(&[1.0]), v(&[-2.0])], 2.0, 1e-8).unwrap();
        assert!((m[0] - 16.0 / 17.0).abs() < 1e-14);
        assert!((m[1] - 1.0 / 17.0).abs() < 1e-14);
    }

    #[test]
    fn scores_reject_empty_centers_and_survive_the_floor() {
        assert!(khm_scores(&v(&[0.0]), &[], 2.0, 1e-8).is_err());
        let (w, m) = khm_scores(&v(&[0.0]), &[v(&[0.0]), v(&[1.0])], 5.0, 1e-8).unwrap();
        assert!(w.is_finite() && w > 0.0);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_pulls_center_in_one_step() {
        let cfg = KhmConfig { distance_metric: DistanceMetric::Euclidean, ..Default::default() };
        let step = khm_iterate(&[v(&[3.0, -1.0])], &[v(&[0.0, 0.0])], &cfg).unwrap();
        assert!((&step.centers[0] - v(&[3.0, -1.0])).norm() < 1e-12);
    }

    #[test]
    fn symmetric_data_keeps_center_at_origin() {
        let data = vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0]), v(&[0.0, 2.0]), v(&[0.0, -2.0])];
        let step = khm_iterate(&data, &[v(&[0.0, 0.0])], &KhmConfig::default()).unwrap();
        assert!(step.centers[0].norm() < 1e-12);
    }

    #[test]
    fn two_blobs_converge_to_generating_means() {
        let data = blobs(&[[0.0, 0.0], [10.0, 10.0]], 500, 4);
        let (centers, _) = khm_converge(&data, &[v(&[3.0, 2.0]), v(&[6.0, 7.0])], &KhmConfig::default()).unwrap();
        let mut cs = centers.clone();
        cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!((&cs[0] - v(&[0.0, 0.0])).norm() < 0.2, "{}", cs[0]);
        assert!((&cs[1] - v(&[10.0, 10.0])).norm() < 0.2, "{}", cs[1]);
    }

    #[test]
    fn bf_init_single_center_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<DVector<f64>> =
            (0..2000).map(|_| v(&[rng.sample(StandardNormal), rng.sample(StandardNormal)])).collect();
        let cfg = KhmConfig::default();
        let c = bradley_fayyad_init(&data, 1, &cfg, &mut rng).unwrap();
        assert_eq!(c.len(), 1);
        // with one center the exponent is 2 and the fixed point is the mean of the pool,
        // which sits close to the full-data mean
        let (full, _) = khm_converge(&data, &c, &cfg).unwrap();
        assert!((&c[0] - &full[0]).norm() < 0.15);
    }

    #[test]
    fn bf_init_with_as_many_centers_as_points() {
        let data = vec![v(&[0.0, 0.0]), v(&[5.0, 1.0]), v(&[-3.0, 4.0])];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = bradley_fayyad_init(&data, 3, &KhmConfig::default(), &mut rng).unwrap();
        for x in &data {
            assert!(c.iter().any(|ci| (ci - x).norm() < 1e-6), "{x} not a center");
        }
        assert!(bradley_fayyad_init(&data, 4, &KhmConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn bf_init_finds_both_blobs_in_most_seeds() {
        let data = blobs(&[[0.0, 0.0], [10.0, 10.0]], 500, 17);
        let truth = [v(&[0.0, 0.0]), v(&[10.0, 10.0])];
        let mut good = 0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let c = bradley_fayyad_init(&data, 2, &KhmConfig::default(), &mut rng).unwrap();
            let direct = (&c[0] - &truth[0]).norm() < 1.0 && (&c[1] - &truth[1]).norm() < 1.0;
            let swapped = (&c[0] - &truth[1]).norm() < 1.0 && (&c[1] - &truth[0]).norm() < 1.0;
            if direct || swapped {
                good += 1;
            }
        }
        assert!(good >= 9, "{good}/10");
    }

    #[test]
    fn point_mass_data_falls_back_to_floor_covariance() {
        let data = vec![v(&[2.0]); 50];
        let (mix, repairs) = estimate_mixture_params(&data, &[v(&[2.0])], &KhmConfig::default()).unwrap();
        assert_eq!(repairs, 1);
        let var = mix.components()[0].covariance()[(0, 0)];
        assert!((var - 1e-8).abs() < 1e-12, "{var}");
    }

    #[test]
    fn single_center_variance_on_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let data: Vec<DVector<f64>> = (0..100_000).map(|_| v(&[rng.sample(StandardNormal)])).collect();
        let cfg = KhmConfig::default();
        let (c, _) = khm_converge(&data, &[v(&[0.5])], &cfg).unwrap();
        let (mix, _) = estimate_mixture_params(&data, &c, &cfg).unwrap();
        let var = mix.components()[0].covariance()[(0, 0)];
        assert!((var - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn two_blob_weights_are_balanced() {
        let data = blobs(&[[0.0, 0.0], [10.0, 10.0]], 500, 6);
        let cfg = KhmConfig::default();
        let (c, _) = khm_converge(&data, &[v(&[1.0, 1.0]), v(&[9.0, 9.0])], &cfg).unwrap();
        let (mix, _) = estimate_mixture_params(&data, &c, &cfg).unwrap();
        for w in mix.weights() {
            assert!((w - 0.5).abs() < 0.05, "{w}");
        }
    }

    #[test]
    fn repair_of_zero_matrix_uses_quarter_variance() {
        // data with unit sample variance per coordinate and no correlation
        let data = vec![v(&[1.0, 1.0]), v(&[1.0, -1.0]), v(&[-1.0, 1.0]), v(&[-1.0, -1.0])];
        let (_, var) = sample_mean_cov(&data);
        let scale = 1.0 / var[(0, 0)];
        let data: Vec<DVector<f64>> = data.iter().map(|x| x * scale.sqrt()).collect();
        let fixed = repair_degenerate(&data, 1e-8);
        assert!((fixed - DMatrix::identity(2, 2) * 0.25).norm() < 1e-12);
    }

    #[test]
    fn repair_of_duplicated_draws_is_spd() {
        let mut data = vec![v(&[1.0, 2.0]); 10];
        data.extend(vec![v(&[2.0, 4.0]); 10]);
        let fixed = repair_degenerate(&data, 1e-8);
        assert!(cholesky_lower(&fixed).is_some());
    }

    #[test]
    fn tiny_sample_falls_back_to_single_normal() {
        let data = vec![v(&[0.0, 1.0]), v(&[1.0, 0.5]), v(&[2.0, 2.0])];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fit = fit_with_bic(&data, &KhmConfig::default(), &mut rng).unwrap();
        assert_eq!(fit.mixture.len(), 1);
        assert!(fit_with_bic(&[], &KhmConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn bic_prefers_one_component_for_normal_data() {
        let mut hits = 0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<DVector<f64>> =
                (0..2000).map(|_| v(&[rng.sample(StandardNormal), rng.sample(StandardNormal)])).collect();
            let fit = fit_with_bic(&data, &KhmConfig::default(), &mut rng).unwrap();
            if fit.mixture.len() == 1 {
                hits += 1;
            }
        }
        assert!(hits >= 8, "{hits}/10");
    }

    #[test]
    fn bic_prefers_three_components_for_three_blobs() {
        let mut hits = 0;
        for seed in 0..10 {
            let data = blobs(&[[0.0, 0.0], [10.0, 0.0], [5.0, 9.0]], 400, 50 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fit = fit_with_bic(&data, &KhmConfig::default(), &mut rng).unwrap();
            if fit.mixture.len() == 3 {
                hits += 1;
            }
        }
        assert!(hits >= 8, "{hits}/10");
    }

    #[test]
    fn fit_is_deterministic_given_seed() {
        let data = blobs(&[[0.0, 0.0], [6.0, 6.0]], 300, 3);
        let a = fit_with_bic(&data, &KhmConfig::default(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = fit_with_bic(&data, &KhmConfig::default(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.mixture, b.mixture);
        assert_eq!(a.bic.to_bits(), b.bic.to_bits());
    }

    #[test]
    fn em_refinement_keeps_covariances() {
        let data = blobs(&[[0.0, 0.0], [8.0, 8.0]], 200, 12);
        let cfg = KhmConfig { em_refine_steps: 3, ..Default::default() };
        let fit = fit_with_bic(&data, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(fit.mixture.len() >= 2);
        let plain = KhmConfig::default();
        let base = fit_with_bic(&data, &plain, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        if base.mixture.len() == fit.mixture.len() {
            for (a, b) in base.mixture.components().iter().zip(fit.mixture.components()) {
                assert!((a.covariance() - b.covariance()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicated_draws_still_cluster() {
        let base = blobs(&[[0.0, 0.0], [10.0, 10.0]], 500, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut data = Vec::new();
        let mut last = base[0].clone();
        for x in &base {
            if rng.random::<f64>() >= 0.5 {
                last = x.clone();
            }
            data.push(last.clone());
        }
        let fit = fit_with_bic(&data, &KhmConfig::default(), &mut rng).unwrap();
        for c in fit.mixture.components() {
            assert!(cholesky_lower(c.covariance()).is_some());
        }
        for truth in [v(&[0.0, 0.0]), v(&[10.0, 10.0])] {
            assert!(fit.centers.iter().any(|c| (c - &truth).norm() < 0.5));
        }
    }

    proptest! {
        #[test]
        fn memberships_are_a_distribution(
            pt in prop::collection::vec(-10.0f64..10.0, 2),
            cs in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 1..6),
            e in 1.0f64..6.0,
        ) {
            let centers: Vec<DVector<f64>> = cs.iter().map(|c| v(c)).collect();
            let (w, m) = khm_scores(&v(&pt), &centers, e, 1e-8).unwrap();
            prop_assert!(w > 0.0 && w.is_finite());
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(m.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn centers_stay_in_the_data_hull(
            pts in prop::collection::vec(-5.0f64..5.0, 5..40),
            c0 in -20.0f64..20.0, c1 in -20.0f64..20.0,
        ) {
            let data: Vec<DVector<f64>> = pts.iter().map(|&x| v(&[x])).collect();
            let lo = pts.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = pts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let step = khm_iterate(&data, &[v(&[c0]), v(&[c1])], &KhmConfig::default()).unwrap();
            for (i, c) in step.centers.iter().enumerate() {
                if !step.stalled.contains(&i) {
                    prop_assert!(c[0] >= lo - 1e-9 && c[0] <= hi + 1e-9);
                }
            }
        }
    }
}
