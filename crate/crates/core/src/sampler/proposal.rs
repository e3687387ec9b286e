//! The layered AIMH proposal `q = ω₁ g₀ + (1 − ω₁) ḡ` and its refitting from the draw history.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::skewness;
use crate::error::{check_dim, invalid, Result};
use crate::khm::{fit_single_normal, fit_with_bic, ClusterFit, KhmConfig};
use crate::linalg::{cholesky_lower, is_well_conditioned_spd};
use crate::mixture::{GaussianComponent, MixtureOfNormals};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    /// Weight of the defensive component `g₀`.
    pub omega1: f64,
    /// Weight of the fattened copies inside `q`.
    pub omega2: f64,
    /// Covariance multiplier of the fattened copies.
    pub fatten_k: f64,
    /// Covariance multiplier of the heavy half of `g₀` (Laplace start and end of loose phase).
    pub g0_inflation: f64,
    /// Weight of the heavy half of `g₀`.
    pub g0_heavy_weight: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self { omega1: 0.05, omega2: 0.15, fatten_k: 16.0, g0_inflation: 25.0, g0_heavy_weight: 0.4 }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega1 > 0.0 && self.omega2 > 0.0 && self.omega1 + self.omega2 < 1.0) {
            return Err(invalid("need omega1 > 0, omega2 > 0 and omega1 + omega2 < 1"));
        }
        if !(self.fatten_k > 1.0) || !(self.g0_inflation > 1.0) {
            return Err(invalid("inflation factors must exceed 1"));
        }
        if !(self.g0_heavy_weight > 0.0 && self.g0_heavy_weight < 1.0) {
            return Err(invalid("g0 heavy weight must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Weight of the fattened copies inside `ḡ`, `ω₂ / (1 − ω₁)`.
    pub fn omega2_prime(&self) -> f64 {
        self.omega2 / (1.0 - self.omega1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProposalState {
    g0: MixtureOfNormals,
    gbar: MixtureOfNormals,
    /// Last mixture fitted to the history, before fattening.
    fitted: Option<MixtureOfNormals>,
    omega1: f64,
    q: MixtureOfNormals,
}

impl ProposalState {
    /// Initial state with `ḡ = g₀`.
    pub fn new(g0: MixtureOfNormals, cfg: &ProposalConfig) -> Result<Self> {
        cfg.validate()?;
        let q = MixtureOfNormals::defensive_combine(&g0, &g0, cfg.omega1)?;
        Ok(Self { gbar: g0.clone(), g0, fitted: None, omega1: cfg.omega1, q })
    }

    pub fn g0(&self) -> &MixtureOfNormals {
        &self.g0
    }

    pub fn gbar(&self) -> &MixtureOfNormals {
        &self.gbar
    }

    pub fn fitted(&self) -> Option<&MixtureOfNormals> {
        self.fitted.as_ref()
    }

    pub fn q(&self) -> &MixtureOfNormals {
        &self.q
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    pub fn dimension(&self) -> usize {
        self.g0.dimension()
    }

    /// Replaces `g₀` and rebuilds `q`.
    pub fn set_g0(&mut self, g0: MixtureOfNormals) -> Result<()> {
        check_dim(self.dimension(), g0.dimension())?;
        self.q = MixtureOfNormals::defensive_combine(&g0, &self.gbar, self.omega1)?;
        self.g0 = g0;
        Ok(())
    }

    /// Installs a new `ḡ` and the fit it came from, and rebuilds `q`.
    pub fn set_gbar(&mut self, gbar: MixtureOfNormals, fitted: MixtureOfNormals) -> Result<()> {
        check_dim(self.dimension(), gbar.dimension())?;
        self.q = MixtureOfNormals::defensive_combine(&self.g0, &gbar, self.omega1)?;
        self.gbar = gbar;
        self.fitted = Some(fitted);
        Ok(())
    }
}

/// `(1 − w) N(mode, Σ) + w N(mode, k Σ)`.
pub fn laplace_mixture(
    mode: &DVector<f64>,
    neg_inv_hessian: &DMatrix<f64>,
    heavy_weight: f64,
    inflation: f64,
) -> Result<MixtureOfNormals> {
    if cholesky_lower(neg_inv_hessian).is_none() {
        return Err(invalid("Laplace covariance is not positive definite"));
    }
    MixtureOfNormals::single(mode.clone(), neg_inv_hessian.clone())?.fatten(inflation, heavy_weight)
}

/// Proposal whose `g₀` is `0.6 N(mode, Σ̂) + 0.4 N(mode, 25 Σ̂)` (with the default config).
pub fn init_proposal_laplace(
    mode: &DVector<f64>,
    neg_inv_hessian: &DMatrix<f64>,
    cfg: &ProposalConfig,
) -> Result<ProposalState> {
    let g0 = laplace_mixture(mode, neg_inv_hessian, cfg.g0_heavy_weight, cfg.g0_inflation)?;
    ProposalState::new(g0, cfg)
}

/// Coordinates grouped by the sample skewness of their marginal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub normal: Vec<usize>,
    pub skewed: Vec<usize>,
    /// Constant coordinates, placed in the normal group.
    pub constant: Vec<usize>,
}

/// Minimum history length for [`partition_parameters`].
pub const MIN_PARTITION_HISTORY: usize = 50;

/// `|skewness| < threshold` puts a coordinate in the normal group.
pub fn partition_parameters(history: &[DVector<f64>], threshold: f64) -> Result<Partition> {
    if history.len() < MIN_PARTITION_HISTORY {
        return Err(invalid(format!("partition needs at least {MIN_PARTITION_HISTORY} draws")));
    }
    let d = history[0].len();
    let mut out = Partition { normal: Vec::new(), skewed: Vec::new(), constant: Vec::new() };
    for j in 0..d {
        let col: Vec<f64> = history.iter().map(|x| x[j]).collect();
        match skewness(&col) {
            Some(s) if s.abs() >= threshold => out.skewed.push(j),
            Some(_) => out.normal.push(j),
            None => {
                out.normal.push(j);
                out.constant.push(j);
            }
        }
    }
    Ok(out)
}

fn select(x: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| x[i]))
}

/// Joint mixture from a normal fit on `normal` coordinates and a mixture `skew_fit` on
/// `skewed` coordinates. Cross-covariances use the responsibilities of `skew_fit`.
pub fn assemble_joint(
    history: &[DVector<f64>],
    normal: &[usize],
    skewed: &[usize],
    skew_fit: &MixtureOfNormals,
    floor: f64,
) -> Result<MixtureOfNormals> {
    let d = normal.len() + skewed.len();
    let theta1: Vec<DVector<f64>> = history.iter().map(|x| select(x, normal)).collect();
    let theta2: Vec<DVector<f64>> = history.iter().map(|x| select(x, skewed)).collect();
    let n1 = normal.len();
    let normal_fit = fit_single_normal(&theta1, floor)?;
    let mu1 = normal_fit.components()[0].mean().clone();
    let sigma1 = normal_fit.components()[0].covariance().clone();
    let p = skew_fit.len();
    let mut resp_sum = vec![0.0; p];
    let mut cross = vec![DMatrix::<f64>::zeros(n1, skewed.len()); p];
    for (t1, t2) in theta1.iter().zip(&theta2) {
        let r = skew_fit.responsibilities(t2)?;
        let a = t1 - &mu1;
        for i in 0..p {
            resp_sum[i] += r[i];
            let b = t2 - skew_fit.components()[i].mean();
            cross[i].ger(r[i], &a, &b, 1.0);
        }
    }
    // permutation from (θ₁, θ₂) order back to original coordinates
    let order: Vec<usize> = normal.iter().chain(skewed).cloned().collect();
    let mut comps = Vec::with_capacity(p);
    for (i, c) in skew_fit.components().iter().enumerate() {
        let omega12 = if resp_sum[i] > 0.0 { &cross[i] / resp_sum[i] } else { DMatrix::zeros(n1, skewed.len()) };
        let build = |scale: f64| {
            let mut m = DMatrix::zeros(d, d);
            m.view_mut((0, 0), (n1, n1)).copy_from(&sigma1);
            m.view_mut((n1, n1), (skewed.len(), skewed.len())).copy_from(c.covariance());
            let off = &omega12 * scale;
            m.view_mut((0, n1), (n1, skewed.len())).copy_from(&off);
            m.view_mut((n1, 0), (skewed.len(), n1)).copy_from(&off.transpose());
            m
        };
        let mut scale = 1.0;
        let mut block = build(scale);
        let mut halvings = 0;
        while !is_well_conditioned_spd(&block) && halvings < 10 {
            scale *= 0.5;
            halvings += 1;
            block = build(scale);
        }
        if !is_well_conditioned_spd(&block) {
            block = build(0.0);
        }
        let mut mean = DVector::zeros(d);
        let mut cov = DMatrix::zeros(d, d);
        let stacked_mean: Vec<f64> = mu1.iter().chain(c.mean().iter()).cloned().collect();
        for (a, &oa) in order.iter().enumerate() {
            mean[oa] = stacked_mean[a];
            for (b, &ob) in order.iter().enumerate() {
                cov[(oa, ob)] = block[(a, b)];
            }
        }
        comps.push(GaussianComponent::new(c.weight(), mean, cov)?);
    }
    MixtureOfNormals::new(comps)
}

/// What a refit produced.
#[derive(Debug, Clone)]
pub struct RefitResult {
    /// The fitted mixture `g*` before fattening.
    pub fitted: MixtureOfNormals,
    /// `ḡ` after fattening and blending.
    pub gbar: MixtureOfNormals,
    pub partition: Partition,
    pub bic: Option<f64>,
}

/// Fits `g*` to the history, fattens it and blends it with the previous `ḡ`.
pub fn refit_mixture<R: Rng + ?Sized>(
    history: &[DVector<f64>],
    previous_gbar: &MixtureOfNormals,
    cfg: &ProposalConfig,
    khm: &KhmConfig,
    skew_threshold: f64,
    beta: f64,
    rng: &mut R,
) -> Result<RefitResult> {
    if history.is_empty() {
        return Err(invalid("refit needs a non-empty history"));
    }
    let d = history[0].len();
    check_dim(previous_gbar.dimension(), d)?;
    let partition = if history.len() < MIN_PARTITION_HISTORY {
        Partition { normal: Vec::new(), skewed: (0..d).collect(), constant: Vec::new() }
    } else {
        partition_parameters(history, skew_threshold)?
    };
    let (fitted, bic) = if partition.skewed.is_empty() {
        (fit_single_normal(history, khm.distance_floor)?, None)
    } else {
        let theta2: Vec<DVector<f64>> = history.iter().map(|x| select(x, &partition.skewed)).collect();
        let ClusterFit { mixture, bic, .. } = fit_with_bic(&theta2, khm, rng)?;
        let joint = if partition.normal.is_empty() {
            mixture
        } else {
            assemble_joint(history, &partition.normal, &partition.skewed, &mixture, khm.distance_floor)?
        };
        (joint, Some(bic))
    };
    let fattened = fitted.fatten(cfg.fatten_k, cfg.omega2_prime())?;
    let gbar = MixtureOfNormals::blend(previous_gbar, &fattened, beta)?;
    Ok(RefitResult { fitted, gbar, partition, bic })
}
