//! Runtime oracles, capped observations and ground-truth evaluators.

mod dataset;
mod synthetic;

pub use dataset::{load_runtime_matrix, RuntimeMatrixDataset};
pub use synthetic::{
    FamilySpec, ParametricFamily, RuntimeDist, SyntheticFamily,
};

use serde::{Deserialize, Serialize};

use crate::utility::UtilityFunction;
use crate::{Error, Result};

/// Outcome of one capped run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CappedObservation {
    /// `min(t, κ)` in seconds.
    pub duration: f64,
    /// `t < κ`; a run landing exactly on the captime counts as capped.
    pub completed: bool,
}

impl CappedObservation {
    pub fn observe(runtime: f64, captime: f64) -> Self {
        if runtime < captime {
            CappedObservation {
                duration: runtime,
                completed: true,
            }
        } else {
            CappedObservation {
                duration: captime,
                completed: false,
            }
        }
    }
}

/// Source of true runtimes `t_ij`.
///
/// Implementations must be pure: the same `(config, instance)` always yields
/// the same runtime, so a rerun at a larger captime reveals more of the same
/// underlying value.
pub trait RuntimeOracle: Send + Sync {
    /// True uncapped runtime of `config` on the `instance`-th instance of the
    /// (possibly permuted) instance stream.
    fn runtime(&self, config: usize, instance: usize) -> Result<f64>;

    fn run(&self, config: usize, instance: usize, captime: f64) -> Result<CappedObservation> {
        if !(captime > 0.0) {
            return Err(Error::domain(format!("captime must be positive, got {captime}")));
        }
        Ok(CappedObservation::observe(self.runtime(config, instance)?, captime))
    }

    /// Number of configurations, or `None` for an unbounded population.
    fn num_configs(&self) -> Option<usize>;

    /// Number of instances, or `None` when the stream is unbounded.
    fn num_instances(&self) -> Option<usize>;

    fn config_name(&self, config: usize) -> String {
        format!("c{config}")
    }
}

/// Analytic (or dataset-wide) truth about each configuration.
pub trait GroundTruth: Send + Sync {
    /// `(U_i(κ), F_i(κ))` with `F_i(κ) = Pr(t < κ)`, the completion
    /// probability at captime κ. `κ = ∞` gives the uncapped `U_i`.
    fn true_capped_utility(
        &self,
        config: usize,
        u: &UtilityFunction,
        captime: f64,
    ) -> Result<(f64, f64)>;

    /// Uncapped expected utility `U_i`.
    fn true_utility(&self, config: usize, u: &UtilityFunction) -> Result<f64> {
        Ok(self.true_capped_utility(config, u, f64::INFINITY)?.0)
    }

    /// `OPT^γ` of the configuration population under uniform sampling of
    /// config ids, when it has a closed form.
    fn population_opt_gamma(&self, _u: &UtilityFunction, _gamma: f64) -> Result<f64> {
        Err(Error::NotImplemented(
            "this population has no closed-form utility quantile".into(),
        ))
    }
}

/// Oracle that also knows its own ground truth.
pub trait SyntheticOracle: RuntimeOracle + GroundTruth {}

impl<T: RuntimeOracle + GroundTruth> SyntheticOracle for T {}
