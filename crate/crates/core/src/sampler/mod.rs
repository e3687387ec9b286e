//! Adaptive independent Metropolis-Hastings.

mod chain;
mod proposal;
mod report;
mod schedule;

pub use chain::{
    maybe_exit_loose, mh_log_alpha, mh_step, run_chain, should_refit, AimhConfig, BetaPolicy, ChainState, History,
    RefitDecision, StepOutcome,
};
pub use proposal::{
    assemble_joint, init_proposal_laplace, laplace_mixture, partition_parameters, refit_mixture, Partition,
    ProposalConfig, ProposalState, RefitResult, MIN_PARTITION_HISTORY,
};
pub use report::{Phase, RefitEvent, RefitReason, RunReport};
pub use schedule::AdaptationSchedule;
