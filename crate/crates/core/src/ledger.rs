//! Simulated configuration-time accounting.

use serde::Serialize;

/// Total simulated seconds spent on runs, including reruns after captime
/// doubling. Keys are arm indices of the owning procedure.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CostLedger {
    total_seconds: f64,
    per_config_seconds: Vec<f64>,
    run_count: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Charges `seconds` spread over `runs` oracle calls to `arm`.
    pub fn charge(&mut self, arm: usize, seconds: f64, runs: u64) {
        if self.per_config_seconds.len() <= arm {
            self.per_config_seconds.resize(arm + 1, 0.0);
        }
        self.per_config_seconds[arm] += seconds;
        self.total_seconds += seconds;
        self.run_count += runs;
    }

    pub fn total_seconds(&self) -> f64 {
        self.total_seconds
    }

    pub fn run_count(&self) -> u64 {
        self.run_count
    }

    /// Seconds charged to `arm` (zero if never charged).
    pub fn seconds_for(&self, arm: usize) -> f64 {
        self.per_config_seconds.get(arm).copied().unwrap_or(0.0)
    }

    pub fn per_config_seconds(&self) -> &[f64] {
        &self.per_config_seconds
    }
}
