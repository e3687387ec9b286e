use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// When the proposal is refitted and when the loose phase ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationSchedule {
    /// Accepted draws required before the first refit.
    pub first_update_accepted: usize,
    /// Explicit loose-phase update iterations; after the last one, every `ladder_tail_every`.
    pub fixed_update_points: Vec<usize>,
    pub ladder_tail_every: usize,
    pub trigger_window: usize,
    pub trigger_level: f64,
    pub loose_exit_window: usize,
    pub loose_exit_level: f64,
    pub strict_update_every: usize,
    pub history_cap: usize,
}

impl Default for AdaptationSchedule {
    fn default() -> Self {
        let mut points: Vec<usize> = (50..=400).step_by(50).collect();
        points.extend((500..=1000).step_by(100));
        points.extend((1500..=3000).step_by(500));
        Self {
            first_update_accepted: 20,
            fixed_update_points: points,
            ladder_tail_every: 1000,
            trigger_window: 10,
            trigger_level: 0.1,
            loose_exit_window: 500,
            loose_exit_level: 0.02,
            strict_update_every: 1000,
            history_cap: 10_000,
        }
    }
}

impl AdaptationSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.fixed_update_points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("update points must be strictly increasing"));
        }
        for p in [self.trigger_level, self.loose_exit_level] {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid("schedule probabilities must lie in (0, 1)"));
            }
        }
        if self.trigger_window == 0
            || self.loose_exit_window == 0
            || self.strict_update_every == 0
            || self.ladder_tail_every == 0
            || self.history_cap < 2
        {
            return Err(invalid("schedule windows, intervals and history cap must be positive"));
        }
        Ok(())
    }

    /// Whether `iteration` is a scheduled loose-phase update point.
    pub fn is_loose_update_point(&self, iteration: usize) -> bool {
        match self.fixed_update_points.last() {
            Some(&last) if iteration <= last => self.fixed_update_points.binary_search(&iteration).is_ok(),
            Some(&last) => (iteration - last).is_multiple_of(self.ladder_tail_every),
            None => iteration.is_multiple_of(self.ladder_tail_every),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ladder() {
        let s = AdaptationSchedule::default();
        s.validate().unwrap();
        let pts: Vec<usize> = (1..=6000).filter(|&i| s.is_loose_update_point(i)).collect();
        assert_eq!(
            pts,
            vec![50, 100, 150, 200, 250, 300, 350, 400, 500, 600, 700, 800, 900, 1000, 1500, 2000, 2500, 3000, 4000, 5000, 6000]
        );
    }

    #[test]
    fn rejects_bad_schedules() {
        let mut s = AdaptationSchedule { fixed_update_points: vec![10, 10], ..Default::default() };
        assert!(s.validate().is_err());
        s = AdaptationSchedule { trigger_level: 1.0, ..Default::default() };
        assert!(s.validate().is_err());
    }
}
