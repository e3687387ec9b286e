use serde::{Deserialize, Serialize};

use crate::mixture::MixtureOfNormals;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Loose,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefitReason {
    Scheduled,
    Triggered,
}

/// One proposal refit and the condition monitors evaluated right after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitEvent {
    pub iteration: usize,
    pub phase: Phase,
    pub reason: RefitReason,
    /// Components of the fitted mixture before fattening.
    pub component_count: usize,
    pub bic: Option<f64>,
    pub normal_coordinates: Vec<usize>,
    pub skewed_coordinates: Vec<usize>,
    pub beta: f64,
    /// Largest `ḡ/g₀` over the monitor test points.
    pub dominance_max: f64,
    /// Largest `|ḡ_prev − ḡ|/g₀` over the monitor test points.
    pub diminishing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub sampler: String,
    pub parameter_names: Vec<String>,
    /// `Z₁, ..., Z_N`; the starting draw is not included.
    pub draws: Vec<Vec<f64>>,
    /// Acceptance probability computed at every iteration.
    pub alpha_trace: Vec<f64>,
    pub accepted: Vec<bool>,
    pub refit_log: Vec<RefitEvent>,
    pub phase_transition_iteration: Option<usize>,
    pub final_proposal: Option<MixtureOfNormals>,
    pub final_fitted: Option<MixtureOfNormals>,
}

impl RunReport {
    pub fn iterations(&self) -> usize {
        self.draws.len()
    }

    pub fn acceptance_rate(&self, range: std::ops::Range<usize>) -> f64 {
        let slice = &self.accepted[range];
        slice.iter().filter(|&&a| a).count() as f64 / slice.len().max(1) as f64
    }

    /// Draws used for inference: from `max(burn_in, end of loose phase)` on.
    pub fn inference_start(&self, burn_in: usize) -> usize {
        burn_in.max(self.phase_transition_iteration.unwrap_or(0)).min(self.draws.len())
    }

    pub fn column(&self, j: usize, from: usize) -> Vec<f64> {
        self.draws[from..].iter().map(|x| x[j]).collect()
    }
}
