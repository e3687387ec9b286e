//! Adaptive random-walk Metropolis baseline.
//!
//! For `j < 5d` the proposal is `N(θ_c, 0.1² V / d)` with `V` the Laplace covariance; after
//! that it is `(1 − β) N(θ_c, 2.38² Σ_j / d) + β N(θ_c, 0.1² I / d)` with `Σ_j` the running
//! covariance of all iterates so far and `β = 0.05`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::cholesky_lower;
use crate::sampler::{RunReport, StepOutcome};
use crate::targets::TargetModel;

pub const ARWM_BETA: f64 = 0.05;
const COV_JITTER: f64 = 1e-10;

/// Streaming mean and covariance (Welford).
#[derive(Debug, Clone)]
pub struct RunningMoments {
    count: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl RunningMoments {
    pub fn new(d: usize) -> Self {
        Self { count: 0, mean: DVector::zeros(d), m2: DMatrix::zeros(d, d) }
    }

    pub fn push(&mut self, x: &DVector<f64>) {
        self.count += 1;
        let delta = x - &self.mean;
        self.mean.axpy(1.0 / self.count as f64, &delta, 1.0);
        let delta2 = x - &self.mean;
        self.m2.ger(1.0, &delta, &delta2, 1.0);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Unbiased covariance, symmetrized; zero before two observations.
    pub fn covariance(&self) -> DMatrix<f64> {
        if self.count < 2 {
            return DMatrix::zeros(self.mean.len(), self.mean.len());
        }
        let c = &self.m2 / (self.count - 1) as f64;
        (&c + c.transpose()) * 0.5
    }
}

/// The proposal rule in force at iteration `j`.
#[derive(Debug, Clone, PartialEq)]
pub enum ArwmProposal {
    Single { covariance: DMatrix<f64> },
    Mixture { adaptive: DMatrix<f64>, fallback: DMatrix<f64>, beta: f64 },
}

#[derive(Debug, Clone)]
pub struct ArwmState {
    pub current: DVector<f64>,
    pub current_log_target: f64,
    pub mode: DVector<f64>,
    laplace_cov: DMatrix<f64>,
    initial_chol: DMatrix<f64>,
    fallback_chol: DMatrix<f64>,
    moments: RunningMoments,
    /// Iterations completed so far.
    pub j: usize,
}

impl ArwmState {
    /// Starts at `mode` with Laplace covariance `laplace_cov`.
    pub fn new(target: &dyn TargetModel, mode: DVector<f64>, laplace_cov: DMatrix<f64>) -> Result<Self> {
        let d = mode.len();
        check_dim(target.dimension(), d)?;
        check_dim(d, laplace_cov.nrows())?;
        let lp = target.log_density(&mode);
        if !lp.is_finite() {
            return Err(invalid("ARWM must start where the target density is finite"));
        }
        let initial = &laplace_cov * (0.01 / d as f64);
        let initial_chol =
            cholesky_lower(&initial).ok_or_else(|| invalid("Laplace covariance is not positive definite"))?;
        let fallback_chol = DMatrix::identity(d, d) * (0.01 / d as f64).sqrt();
        let mut moments = RunningMoments::new(d);
        moments.push(&mode);
        Ok(Self {
            current: mode.clone(),
            current_log_target: lp,
            mode,
            laplace_cov,
            initial_chol,
            fallback_chol,
            moments,
            j: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.mode.len()
    }

    pub fn laplace_cov(&self) -> &DMatrix<f64> {
        &self.laplace_cov
    }

    pub fn moments(&self) -> &RunningMoments {
        &self.moments
    }
}

/// Proposal distribution for the state's current iteration.
pub fn arwm_proposal_cov(state: &ArwmState) -> ArwmProposal {
    let d = state.dimension();
    if state.j < 5 * d {
        return ArwmProposal::Single { covariance: &state.laplace_cov * (0.01 / d as f64) };
    }
    let adaptive = state.moments.covariance() * (2.38 * 2.38 / d as f64) + DMatrix::identity(d, d) * COV_JITTER;
    ArwmProposal::Mixture { adaptive, fallback: DMatrix::identity(d, d) * (0.01 / d as f64), beta: ARWM_BETA }
}

fn normal_step<R: Rng + ?Sized>(chol: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let e = DVector::from_fn(chol.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    chol * e
}

fn normal_log_density(cov: &DMatrix<f64>, x: &DVector<f64>) -> Option<f64> {
    let chol = cov.clone().cholesky()?;
    let d = x.len() as f64;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Some(-0.5 * (d * (2.0 * std::f64::consts::PI).ln() + logdet + x.dot(&chol.solve(x))))
}

/// Log density of moving from `from` to `to` under `proposal`.
pub fn arwm_proposal_log_density(proposal: &ArwmProposal, from: &DVector<f64>, to: &DVector<f64>) -> Option<f64> {
    let step = to - from;
    match proposal {
        ArwmProposal::Single { covariance } => normal_log_density(covariance, &step),
        ArwmProposal::Mixture { adaptive, fallback, beta } => {
            let a = normal_log_density(adaptive, &step)? + (1.0 - beta).ln();
            let b = normal_log_density(fallback, &step)? + beta.ln();
            let m = a.max(b);
            Some(m + ((a - m).exp() + (b - m).exp()).ln())
        }
    }
}

/// One symmetric random-walk step; updates `j` and the running moments.
pub fn arwm_step<R: Rng + ?Sized>(state: &mut ArwmState, target: &dyn TargetModel, rng: &mut R) -> Result<StepOutcome> {
    let d = state.dimension();
    let step = if state.j < 5 * d {
        normal_step(&state.initial_chol, rng)
    } else if rng.random::<f64>() < ARWM_BETA {
        normal_step(&state.fallback_chol, rng)
    } else {
        let mut cov = state.moments.covariance() * (2.38 * 2.38 / d as f64);
        let mut jitter = COV_JITTER;
        let chol = loop {
            let mut c = cov.clone();
            for i in 0..d {
                c[(i, i)] += jitter;
            }
            if let Some(l) = cholesky_lower(&c) {
                break l;
            }
            jitter *= 100.0;
            if jitter > 1.0 {
                cov = DMatrix::zeros(d, d);
            }
        };
        normal_step(&chol, rng)
    };
    let z = &state.current + step;
    let lp = target.log_density(&z);
    if lp.is_nan() || lp == f64::INFINITY {
        return Err(Error::Numerical(format!("target returned {lp} at {:?}", z.as_slice())));
    }
    let alpha = if lp == f64::NEG_INFINITY { 0.0 } else { (lp - state.current_log_target).min(0.0).exp() };
    let accepted = alpha > 0.0 && rng.random::<f64>() < alpha;
    if accepted {
        state.current = z;
        state.current_log_target = lp;
    }
    state.j += 1;
    state.moments.push(&state.current);
    Ok(StepOutcome { accepted, alpha })
}

/// Runs `n_iterations` ARWM steps from the mode.
pub fn run_arwm<R: Rng + ?Sized>(
    target: &dyn TargetModel,
    mode: DVector<f64>,
    laplace_cov: DMatrix<f64>,
    n_iterations: usize,
    rng: &mut R,
) -> Result<RunReport> {
    if n_iterations == 0 {
        return Err(invalid("n_iterations must be at least 1"));
    }
    let mut state = ArwmState::new(target, mode, laplace_cov)?;
    let mut report = RunReport {
        sampler: "arwm".into(),
        parameter_names: target.parameter_names(),
        draws: Vec::with_capacity(n_iterations),
        alpha_trace: Vec::with_capacity(n_iterations),
        accepted: Vec::with_capacity(n_iterations),
        refit_log: Vec::new(),
        phase_transition_iteration: None,
        final_proposal: None,
        final_fitted: None,
    };
    for _ in 0..n_iterations {
        let out = arwm_step(&mut state, target, rng)?;
        report.draws.push(state.current.as_slice().to_vec());
        report.alpha_trace.push(out.alpha);
        report.accepted.push(out.accepted);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sample_mean_cov;
    use crate::mixture::MixtureOfNormals;
    use crate::targets::MixtureTarget;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn std_normal(d: usize) -> MixtureTarget {
        MixtureTarget::new(MixtureOfNormals::single(DVector::zeros(d), DMatrix::identity(d, d)).unwrap())
    }

    #[test]
    fn proposal_regimes() {
        let t = std_normal(3);
        let v = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let mut st = ArwmState::new(&t, DVector::zeros(3), v.clone()).unwrap();
        st.j = 10;
        assert_eq!(arwm_proposal_cov(&st), ArwmProposal::Single { covariance: &v * (0.01 / 3.0) });
        st.j = 15;
        match arwm_proposal_cov(&st) {
            ArwmProposal::Mixture { beta, fallback, .. } => {
                assert_eq!(beta, 0.05);
                assert!((fallback - DMatrix::identity(3, 3) * (0.01 / 3.0)).norm() < 1e-15);
            }
            other => panic!("expected mixture, got {other:?}"),
        }
        let t1 = std_normal(1);
        let st1 = ArwmState::new(&t1, DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
        assert_eq!(arwm_proposal_cov(&st1), ArwmProposal::Single { covariance: DMatrix::from_element(1, 1, 0.01) });
    }

    #[test]
    fn equal_densities_accept_surely() {
        struct Flat;
        impl TargetModel for Flat {
            fn dimension(&self) -> usize {
                2
            }
            fn log_density(&self, _: &DVector<f64>) -> f64 {
                0.0
            }
        }
        let mut st = ArwmState::new(&Flat, DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let out = arwm_step(&mut st, &Flat, &mut rng).unwrap();
            assert_eq!(out.alpha, 1.0);
            assert!(out.accepted);
        }
    }

    #[test]
    fn standard_normal_acceptance_rate() {
        let t = std_normal(1);
        let r = run_arwm(&t, DVector::zeros(1), DMatrix::identity(1, 1), 50_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let rate = r.acceptance_rate(0..50_000);
        assert!((0.3..=0.6).contains(&rate), "{rate}");
    }

    #[test]
    fn streaming_covariance_matches_batch() {
        let t = std_normal(2);
        let mut st = ArwmState::new(&t, DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut all = vec![st.current.clone()];
        for k in 1..=1000 {
            arwm_step(&mut st, &t, &mut rng).unwrap();
            all.push(st.current.clone());
            if k % 100 == 0 {
                let (m, c) = sample_mean_cov(&all);
                assert!((st.moments().mean() - m).amax() < 1e-8);
                assert!((st.moments().covariance() - c).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn running_variance_of_iid_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = RunningMoments::new(1);
        for _ in 0..1000 {
            m.push(&DVector::from_element(1, rng.sample::<f64, _>(StandardNormal)));
        }
        assert!((m.covariance()[(0, 0)] - 1.0).abs() < 0.1);
    }

    #[test]
    fn one_dimensional_running_variance_after_many_draws() {
        let t = std_normal(1);
        let mut st = ArwmState::new(&t, DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20_000 {
            arwm_step(&mut st, &t, &mut rng).unwrap();
        }
        assert!((st.moments().covariance()[(0, 0)] - 1.0).abs() < 0.1);
    }

    #[test]
    fn proposals_are_symmetric() {
        let t = std_normal(2);
        let mut st = ArwmState::new(&t, DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for regime_j in [0usize, 50] {
            while st.j < regime_j {
                arwm_step(&mut st, &t, &mut rng).unwrap();
            }
            let prop = arwm_proposal_cov(&st);
            for _ in 0..10 {
                let a = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
                let b = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
                let ab = arwm_proposal_log_density(&prop, &a, &b).unwrap();
                let ba = arwm_proposal_log_density(&prop, &b, &a).unwrap();
                assert!((ab - ba).abs() < 1e-12);
            }
        }
    }
}
