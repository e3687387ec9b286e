//! Finite mixtures of multivariate normal distributions.
//!
//! A [`MixtureOfNormals`] is the currency of the whole toolkit: the proposal of the adaptive
//! sampler, the output of the clustering step and the toy targets are all mixtures. Every
//! component caches its Cholesky factor and log-determinant at construction, so a mixture
//! that exists is always evaluable.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{cholesky_lower, forward_solve_into, log_det_from_chol};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Components kept by [`MixtureOfNormals::blend`] before the lightest ones are dropped.
pub const MAX_BLEND_COMPONENTS: usize = 64;

/// One weighted Gaussian kernel with cached factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    weight: f64,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0 + 1e-12) {
            return Err(invalid(format!("component weight {weight} outside (0, 1]")));
        }
        let d = mean.len();
        if d == 0 {
            return Err(invalid("component of dimension zero"));
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: covariance.nrows() });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(invalid("component mean is not finite"));
        }
        let asym = (&covariance - covariance.transpose()).abs().max();
        if asym > 1e-9 * covariance.abs().max().max(1.0) {
            return Err(Error::NotPositiveDefinite("covariance is not symmetric".into()));
        }
        let chol = cholesky_lower(&covariance)
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        let log_det = log_det_from_chol(&chol);
        Ok(Self { weight: weight.min(1.0), mean, covariance, chol, log_det })
    }

    pub fn univariate(weight: f64, mean: f64, variance: f64) -> Result<Self> {
        Self::new(weight, DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn chol_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    /// Log of the (unweighted) normal density at `z`, using `scratch` of length `d`.
    fn log_kernel(&self, z: &[f64], diff: &mut [f64], solved: &mut [f64]) -> f64 {
        for ((d, &zi), &mi) in diff.iter_mut().zip(z).zip(self.mean.iter()) {
            *d = zi - mi;
        }
        forward_solve_into(&self.chol, diff, solved);
        let quad: f64 = solved.iter().map(|v| v * v).sum();
        -0.5 * (self.mean.len() as f64 * LN_2PI + self.log_det + quad)
    }

    /// Log normal density of this kernel at `z` (weight not included).
    pub fn log_pdf(&self, z: &DVector<f64>) -> f64 {
        let d = self.mean.len();
        let mut diff = vec![0.0; d];
        let mut solved = vec![0.0; d];
        self.log_kernel(z.as_slice(), &mut diff, &mut solved)
    }

    fn with_weight(&self, weight: f64) -> Self {
        Self { weight, ..self.clone() }
    }

    fn scaled(&self, k: f64) -> Self {
        let d = self.mean.len() as f64;
        Self {
            weight: self.weight,
            mean: self.mean.clone(),
            covariance: &self.covariance * k,
            chol: &self.chol * k.sqrt(),
            log_det: self.log_det + d * k.ln(),
        }
    }
}

/// A finite mixture of multivariate normals with weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureDocument", into = "MixtureDocument")]
pub struct MixtureOfNormals {
    components: Vec<GaussianComponent>,
    dimension: usize,
}

impl MixtureOfNormals {
    /// Builds a mixture whose weights already sum to one (within `1e-9`); they are
    /// renormalized exactly.
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("component weights sum to {total}, not 1")));
        }
        Self::from_unnormalized(components)
    }

    /// Builds a mixture from positive weights of any scale.
    pub fn from_unnormalized(mut components: Vec<GaussianComponent>) -> Result<Self> {
        let first = components.first().ok_or_else(|| invalid("mixture without components"))?;
        let dimension = first.dimension();
        for c in &components {
            check_dim(dimension, c.dimension())?;
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(invalid("non-positive component weight"));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        for c in &mut components {
            c.weight /= total;
        }
        Ok(Self { components, dimension })
    }

    /// A single normal `N(mean, covariance)`.
    pub fn single(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![GaussianComponent::new(1.0, mean, covariance)?])
    }

    /// Univariate mixture from `(weight, mean, variance)` triples.
    pub fn univariate(parts: &[(f64, f64, f64)]) -> Result<Self> {
        let comps = parts
            .iter()
            .map(|&(w, m, v)| GaussianComponent::univariate(w, m, v))
            .collect::<Result<Vec<_>>>()?;
        Self::from_unnormalized(comps)
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// `log Σ w_i φ(z; μ_i, Σ_i)` evaluated with log-sum-exp.
    pub fn log_density(&self, z: &DVector<f64>) -> Result<f64> {
        check_dim(self.dimension, z.len())?;
        Ok(self.log_density_unchecked(z.as_slice()))
    }

    pub(crate) fn log_density_unchecked(&self, z: &[f64]) -> f64 {
        let d = self.dimension;
        let mut diff = vec![0.0; d];
        let mut solved = vec![0.0; d];
        let mut terms = Vec::with_capacity(self.components.len());
        for c in &self.components {
            terms.push(c.weight.ln() + c.log_kernel(z, &mut diff, &mut solved));
        }
        log_sum_exp(&terms)
    }

    /// Per-component posterior responsibilities `Pr(component i | z)`.
    pub fn responsibilities(&self, z: &DVector<f64>) -> Result<Vec<f64>> {
        check_dim(self.dimension, z.len())?;
        let d = self.dimension;
        let mut diff = vec![0.0; d];
        let mut solved = vec![0.0; d];
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + c.log_kernel(z.as_slice(), &mut diff, &mut solved))
            .collect();
        let lse = log_sum_exp(&terms);
        Ok(terms.iter().map(|t| (t - lse).exp()).collect())
    }

    /// Draws a component by weight, then `μ_i + L_i ε`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                idx = i;
                break;
            }
        }
        let c = &self.components[idx];
        let eps = DVector::from_fn(self.dimension, |_, _| rng.sample::<f64, _>(StandardNormal));
        &c.mean + &c.chol * eps
    }

    /// Mixture mean and covariance.
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.dimension;
        let mut mean = DVector::zeros(d);
        for c in &self.components {
            mean.axpy(c.weight, &c.mean, 1.0);
        }
        let mut second = DMatrix::zeros(d, d);
        for c in &self.components {
            second += (&c.covariance + &c.mean * c.mean.transpose()) * c.weight;
        }
        let cov = second - &mean * mean.transpose();
        (mean, cov)
    }

    /// Same weights and means, every covariance multiplied by `k`.
    pub fn inflate(&self, k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(invalid(format!("inflation factor {k} must be positive")));
        }
        Ok(Self {
            components: self.components.iter().map(|c| c.scaled(k)).collect(),
            dimension: self.dimension,
        })
    }

    /// Stretches and fattens the tails: `heavy_weight · inflate(k) + (1 − heavy_weight) · self`.
    pub fn fatten(&self, k: f64, heavy_weight: f64) -> Result<Self> {
        if !(k > 1.0) || !k.is_finite() {
            return Err(invalid(format!("fattening factor k = {k} must exceed 1")));
        }
        if !(heavy_weight > 0.0 && heavy_weight < 1.0) {
            return Err(invalid(format!("heavy-tail weight {heavy_weight} outside (0, 1)")));
        }
        let mut components = Vec::with_capacity(2 * self.len());
        for c in &self.components {
            components.push(c.with_weight(c.weight * (1.0 - heavy_weight)));
        }
        for c in &self.components {
            let mut s = c.scaled(k);
            s.weight = c.weight * heavy_weight;
            components.push(s);
        }
        Self::from_unnormalized(components)
    }

    /// Defensive mixture `ω₁ · g0 + (1 − ω₁) · gbar`.
    pub fn defensive_combine(g0: &Self, gbar: &Self, omega1: f64) -> Result<Self> {
        check_dim(g0.dimension, gbar.dimension)?;
        if !(omega1 > 0.0 && omega1 < 1.0) {
            return Err(invalid(format!("defensive weight {omega1} outside (0, 1)")));
        }
        Self::union(g0, omega1, gbar, 1.0 - omega1)
    }

    /// Diminishing-adaptation blend `(1 − β) · new + β · prev`, capped at
    /// [`MAX_BLEND_COMPONENTS`] components.
    pub fn blend(prev: &Self, new: &Self, beta: f64) -> Result<Self> {
        check_dim(prev.dimension, new.dimension)?;
        if !(0.0..=1.0).contains(&beta) {
            return Err(invalid(format!("blend coefficient {beta} outside [0, 1]")));
        }
        if beta == 0.0 {
            return Ok(new.clone());
        }
        if beta == 1.0 {
            return Ok(prev.clone());
        }
        let mut out = Self::union(new, 1.0 - beta, prev, beta)?;
        out.truncate_to(MAX_BLEND_COMPONENTS);
        Ok(out)
    }

    fn union(a: &Self, wa: f64, b: &Self, wb: f64) -> Result<Self> {
        let mut components = Vec::with_capacity(a.len() + b.len());
        components.extend(a.components.iter().map(|c| c.with_weight(c.weight * wa)));
        components.extend(b.components.iter().map(|c| c.with_weight(c.weight * wb)));
        Self::from_unnormalized(components)
    }

    /// Keeps the `max` heaviest components (stable among ties) and renormalizes.
    fn truncate_to(&mut self, max: usize) {
        if self.components.len() <= max {
            return;
        }
        let mut order: Vec<usize> = (0..self.components.len()).collect();
        order.sort_by(|&i, &j| {
            self.components[j].weight.total_cmp(&self.components[i].weight).then(i.cmp(&j))
        });
        let mut keep: Vec<usize> = order[..max].to_vec();
        keep.sort_unstable();
        let mut comps: Vec<GaussianComponent> =
            keep.into_iter().map(|i| self.components[i].clone()).collect();
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        for c in &mut comps {
            c.weight /= total;
        }
        self.components = comps;
    }

    /// Marginal mixture over the coordinates in `indices` (in the given order).
    pub fn marginal(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() || indices.iter().any(|&i| i >= self.dimension) {
            return Err(invalid("marginal indices out of range"));
        }
        let comps = self
            .components
            .iter()
            .map(|c| {
                let mean = DVector::from_iterator(indices.len(), indices.iter().map(|&i| c.mean[i]));
                let cov = DMatrix::from_fn(indices.len(), indices.len(), |r, s| {
                    c.covariance[(indices[r], indices[s])]
                });
                GaussianComponent::new(c.weight, mean, cov)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_unnormalized(comps)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Interchange document: `{dimension, components: [{weight, mean, covariance}]}` with
/// covariances stored as full row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureDocument {
    pub dimension: usize,
    pub components: Vec<ComponentDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentDocument {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl From<MixtureOfNormals> for MixtureDocument {
    fn from(m: MixtureOfNormals) -> Self {
        let components = m
            .components
            .iter()
            .map(|c| ComponentDocument {
                weight: c.weight,
                mean: c.mean.iter().cloned().collect(),
                covariance: (0..c.covariance.nrows())
                    .map(|r| c.covariance.row(r).iter().cloned().collect())
                    .collect(),
            })
            .collect();
        MixtureDocument { dimension: m.dimension, components }
    }
}

impl TryFrom<MixtureDocument> for MixtureOfNormals {
    type Error = Error;

    fn try_from(doc: MixtureDocument) -> Result<Self> {
        let d = doc.dimension;
        let comps = doc
            .components
            .into_iter()
            .map(|c| {
                check_dim(d, c.mean.len())?;
                check_dim(d, c.covariance.len())?;
                for row in &c.covariance {
                    check_dim(d, row.len())?;
                }
                let cov = DMatrix::from_fn(d, d, |r, s| c.covariance[r][s]);
                GaussianComponent::new(c.weight, DVector::from_vec(c.mean), cov)
            })
            .collect::<Result<Vec<_>>>()?;
        let mix = Self::new(comps)?;
        check_dim(d, mix.dimension)?;
        Ok(mix)
    }
}
