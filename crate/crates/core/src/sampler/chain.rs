//! The AIMH chain: Metropolis-Hastings steps, the loose/strict schedule and history upkeep.

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::proposal::{refit_mixture, ProposalConfig, ProposalState};
use super::report::{Phase, RefitEvent, RefitReason, RunReport};
use super::schedule::AdaptationSchedule;
use crate::diagnostics::{diminishing_monitor, dominance_monitor};
use crate::error::{check_dim, invalid, Error, Result};
use crate::khm::KhmConfig;
use crate::targets::TargetModel;

/// Weight given to the previous `ḡ` when blending in a new fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaPolicy {
    Zero,
    /// `β_n = 1 − n^{−r}` for the `n`-th strict-phase refit; 0 in the loose phase.
    Power { r: f64 },
}

impl BetaPolicy {
    pub fn beta(&self, phase: Phase, strict_refits: usize) -> f64 {
        match (self, phase) {
            (BetaPolicy::Power { r }, Phase::Strict) if strict_refits > 0 => 1.0 - (strict_refits as f64).powf(-r),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AimhConfig {
    pub proposal: ProposalConfig,
    pub schedule: AdaptationSchedule,
    pub khm: KhmConfig,
    pub beta: BetaPolicy,
    /// `|skewness|` below this puts a coordinate in the normal group.
    pub skew_threshold: f64,
    pub monitor_points: usize,
    /// Seed of the monitor test points; reused at every refit.
    pub monitor_seed: u64,
    /// Allow triggered refits in the strict phase.
    pub trigger_in_strict: bool,
    /// Redraws allowed for a starting point with finite target density.
    pub max_initial_redraws: usize,
}

impl Default for AimhConfig {
    fn default() -> Self {
        Self {
            proposal: ProposalConfig::default(),
            schedule: AdaptationSchedule::default(),
            khm: KhmConfig::default(),
            beta: BetaPolicy::Zero,
            skew_threshold: 0.2,
            monitor_points: 1000,
            monitor_seed: 0x5eed,
            trigger_in_strict: false,
            max_initial_redraws: 1000,
        }
    }
}

impl AimhConfig {
    pub fn validate(&self) -> Result<()> {
        self.proposal.validate()?;
        self.schedule.validate()?;
        self.khm.validate()?;
        if let BetaPolicy::Power { r } = self.beta {
            if !(r > 0.0) {
                return Err(invalid("beta power r must be positive"));
            }
        }
        if self.monitor_points == 0 {
            return Err(invalid("monitor_points must be positive"));
        }
        Ok(())
    }
}

/// Draw history thinned by a growing stride so that it never exceeds `cap`.
#[derive(Debug, Clone)]
pub struct History {
    cap: usize,
    stride: usize,
    seen: usize,
    items: Vec<DVector<f64>>,
}

impl History {
    pub fn new(cap: usize) -> Self {
        Self { cap: cap.max(2), stride: 1, seen: 0, items: Vec::new() }
    }

    pub fn push(&mut self, z: &DVector<f64>) {
        self.seen += 1;
        if !self.seen.is_multiple_of(self.stride) {
            return;
        }
        if self.items.len() == self.cap {
            // keep the draws whose position is a multiple of the doubled stride
            let kept: Vec<DVector<f64>> = self.items.iter().skip(1).step_by(2).cloned().collect();
            self.items = kept;
            self.stride *= 2;
            if !self.seen.is_multiple_of(self.stride) {
                return;
            }
        }
        self.items.push(z.clone());
    }

    pub fn items(&self) -> &[DVector<f64>] {
        &self.items
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub current: DVector<f64>,
    pub current_log_target: f64,
    /// `log q(current)` under the proposal in use.
    pub current_log_q: f64,
    pub phase: Phase,
    pub iteration: usize,
    pub accepted_count: usize,
    /// Most recent acceptance probabilities, at most `loose_exit_window` of them.
    pub alpha_window: VecDeque<f64>,
    window_cap: usize,
    pub history: History,
    pub last_refit_iteration: Option<usize>,
    pub strict_refits: usize,
}

impl ChainState {
    pub fn new(current: DVector<f64>, log_target: f64, proposal: &ProposalState, schedule: &AdaptationSchedule) -> Self {
        let current_log_q = proposal.q().log_density_unchecked(current.as_slice());
        let mut history = History::new(schedule.history_cap);
        history.push(&current);
        Self {
            current,
            current_log_target: log_target,
            current_log_q,
            phase: Phase::Loose,
            iteration: 0,
            accepted_count: 0,
            alpha_window: VecDeque::with_capacity(schedule.loose_exit_window),
            window_cap: schedule.loose_exit_window,
            history,
            last_refit_iteration: None,
            strict_refits: 0,
        }
    }

    pub fn record_alpha(&mut self, alpha: f64) {
        if self.alpha_window.len() == self.window_cap {
            self.alpha_window.pop_front();
        }
        self.alpha_window.push_back(alpha);
    }

    fn refresh_log_q(&mut self, proposal: &ProposalState) {
        self.current_log_q = proposal.q().log_density_unchecked(self.current.as_slice());
    }
}

/// `ln α = min(0, ln π(z′) − ln π(z) + ln q(z) − ln q(z′))`.
pub fn mh_log_alpha(log_target_new: f64, log_target_current: f64, log_q_current: f64, log_q_new: f64) -> f64 {
    if log_target_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    (log_target_new - log_target_current + log_q_current - log_q_new).min(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub alpha: f64,
}

/// One independence Metropolis-Hastings step with proposal `q`.
pub fn mh_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    proposal: &ProposalState,
    target: &dyn TargetModel,
    rng: &mut R,
) -> Result<StepOutcome> {
    let q = proposal.q();
    let z = q.sample(rng);
    let lp = target.log_density(&z);
    if lp.is_nan() || lp == f64::INFINITY {
        return Err(Error::Numerical(format!("target returned {lp} at {:?}", z.as_slice())));
    }
    let lq = q.log_density_unchecked(z.as_slice());
    let log_alpha = mh_log_alpha(lp, state.current_log_target, state.current_log_q, lq);
    let alpha = log_alpha.exp();
    let accepted = alpha > 0.0 && rng.random::<f64>() < alpha;
    if accepted {
        state.current = z;
        state.current_log_target = lp;
        state.current_log_q = lq;
        state.accepted_count += 1;
    }
    Ok(StepOutcome { accepted, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefitDecision {
    No,
    Scheduled,
    Triggered,
}

/// Refit rule at the current iteration. Nothing happens before `first_update_accepted`
/// acceptances; the first iteration past that gate always refits.
pub fn should_refit(state: &ChainState, schedule: &AdaptationSchedule, trigger_in_strict: bool) -> RefitDecision {
    if state.accepted_count < schedule.first_update_accepted {
        return RefitDecision::No;
    }
    let Some(last) = state.last_refit_iteration else {
        return RefitDecision::Scheduled;
    };
    let it = state.iteration;
    let scheduled = match state.phase {
        Phase::Loose => schedule.is_loose_update_point(it),
        Phase::Strict => it.is_multiple_of(schedule.strict_update_every),
    };
    if scheduled {
        return RefitDecision::Scheduled;
    }
    let trigger_allowed = state.phase == Phase::Loose || trigger_in_strict;
    let l = schedule.trigger_window;
    if trigger_allowed && state.alpha_window.len() >= l && it >= last + l {
        let mean = state.alpha_window.iter().rev().take(l).sum::<f64>() / l as f64;
        if mean < schedule.trigger_level {
            return RefitDecision::Triggered;
        }
    }
    RefitDecision::No
}

/// Phase after the loose-exit rule: strict once the smallest of the last `M` acceptance
/// probabilities exceeds `αM`.
pub fn maybe_exit_loose(state: &ChainState, schedule: &AdaptationSchedule) -> Phase {
    if state.phase == Phase::Strict {
        return Phase::Strict;
    }
    if state.alpha_window.len() < schedule.loose_exit_window {
        return Phase::Loose;
    }
    let min = state.alpha_window.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > schedule.loose_exit_level { Phase::Strict } else { Phase::Loose }
}

/// Runs `n_iterations` AIMH steps from `init`. The starting draw is `initial_state` when
/// given and otherwise a draw from `init.q()`.
pub fn run_chain<R: Rng + ?Sized>(
    target: &dyn TargetModel,
    init: ProposalState,
    n_iterations: usize,
    cfg: &AimhConfig,
    initial_state: Option<DVector<f64>>,
    rng: &mut R,
) -> Result<RunReport> {
    cfg.validate()?;
    if n_iterations == 0 {
        return Err(invalid("n_iterations must be at least 1"));
    }
    check_dim(target.dimension(), init.dimension())?;
    let mut proposal = init;
    let (z0, lp0) = match initial_state {
        Some(z) => {
            check_dim(target.dimension(), z.len())?;
            let lp = target.log_density(&z);
            if !lp.is_finite() {
                return Err(invalid("initial state has non-finite target density"));
            }
            (z, lp)
        }
        None => initial_draw(target, &proposal, cfg.max_initial_redraws, rng)?,
    };
    let mut state = ChainState::new(z0, lp0, &proposal, &cfg.schedule);
    let mut report = RunReport {
        sampler: "aimh".into(),
        parameter_names: target.parameter_names(),
        draws: Vec::with_capacity(n_iterations),
        alpha_trace: Vec::with_capacity(n_iterations),
        accepted: Vec::with_capacity(n_iterations),
        refit_log: Vec::new(),
        phase_transition_iteration: None,
        final_proposal: None,
        final_fitted: None,
    };
    for n in 1..=n_iterations {
        let step = mh_step(&mut state, &proposal, target, rng)?;
        state.iteration = n;
        state.record_alpha(step.alpha);
        state.history.push(&state.current);
        report.draws.push(state.current.as_slice().to_vec());
        report.alpha_trace.push(step.alpha);
        report.accepted.push(step.accepted);

        let decision = should_refit(&state, &cfg.schedule, cfg.trigger_in_strict);
        if decision != RefitDecision::No {
            let reason = if decision == RefitDecision::Triggered { RefitReason::Triggered } else { RefitReason::Scheduled };
            if state.phase == Phase::Strict {
                state.strict_refits += 1;
            }
            let beta = cfg.beta.beta(state.phase, state.strict_refits);
            match refit_mixture(state.history.items(), proposal.gbar(), &cfg.proposal, &cfg.khm, cfg.skew_threshold, beta, rng) {
                Ok(fit) => {
                    let mut mrng = ChaCha8Rng::seed_from_u64(cfg.monitor_seed);
                    let dominance = dominance_monitor(&fit.gbar, proposal.g0(), cfg.monitor_points, &mut mrng)?;
                    let mut mrng = ChaCha8Rng::seed_from_u64(cfg.monitor_seed);
                    let diminishing =
                        diminishing_monitor(proposal.gbar(), &fit.gbar, proposal.g0(), cfg.monitor_points, &mut mrng)?;
                    report.refit_log.push(RefitEvent {
                        iteration: n,
                        phase: state.phase,
                        reason,
                        component_count: fit.fitted.len(),
                        bic: fit.bic,
                        normal_coordinates: fit.partition.normal.clone(),
                        skewed_coordinates: fit.partition.skewed.clone(),
                        beta,
                        dominance_max: dominance.max_ratio,
                        diminishing,
                    });
                    proposal.set_gbar(fit.gbar, fit.fitted)?;
                    state.refresh_log_q(&proposal);
                }
                Err(e) => log::warn!("refit at iteration {n} failed, keeping the previous proposal: {e}"),
            }
            state.last_refit_iteration = Some(n);
        }

        if state.phase == Phase::Loose && maybe_exit_loose(&state, &cfg.schedule) == Phase::Strict {
            state.phase = Phase::Strict;
            report.phase_transition_iteration = Some(n);
            if let Some(g_last) = proposal.fitted() {
                let g0 = g_last.fatten(cfg.proposal.g0_inflation, cfg.proposal.g0_heavy_weight)?;
                proposal.set_g0(g0)?;
                state.refresh_log_q(&proposal);
            }
            log::debug!("loose phase ended at iteration {n}");
        }
    }
    report.final_fitted = proposal.fitted().cloned();
    report.final_proposal = Some(proposal.q().clone());
    Ok(report)
}

fn initial_draw<R: Rng + ?Sized>(
    target: &dyn TargetModel,
    proposal: &ProposalState,
    max_redraws: usize,
    rng: &mut R,
) -> Result<(DVector<f64>, f64)> {
    for _ in 0..=max_redraws {
        let z = proposal.q().sample(rng);
        let lp = target.log_density(&z);
        if lp.is_nan() {
            return Err(Error::Numerical("target returned NaN at the starting draw".into()));
        }
        if lp.is_finite() {
            return Ok((z, lp));
        }
    }
    Err(Error::Numerical(format!("no starting draw with finite target density in {max_redraws} redraws")))
}
