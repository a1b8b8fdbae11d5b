use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::harness::run::execute;
use crate::harness::spec::{ExperimentSpec, OracleSpec, Procedure};
use crate::{Error, Result};

// Slack for quadrature error in the ground truth.
const TRUTH_TOLERANCE: f64 = 1e-9;

/// Failure count of one certificate type (all runs, or one COUP phase).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationGroup {
    pub label: String,
    pub trials: usize,
    pub failures: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub procedure: Procedure,
    pub trials: usize,
    pub delta: f64,
    /// `δ + 3·sqrt(δ(1−δ)/trials)`.
    pub threshold: f64,
    pub groups: Vec<ValidationGroup>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn worst_rate(&self) -> f64 {
        self.groups.iter().map(|g| g.rate).fold(0.0, f64::max)
    }
}

pub fn failure_threshold(delta: f64, trials: usize) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt()
}

/// Violations per phase (COUP) or a single flag (everything else) for one
/// seeded replica.
fn trial(spec: &ExperimentSpec) -> Result<Vec<bool>> {
    let result = execute(spec).map_err(|(e, _)| e)?;
    let built = spec.build_oracle()?;
    let truth = built.truth.ok_or_else(|| Error::NotImplemented("oracle has no ground truth".into()))?;
    let u = &spec.utility;
    match spec.procedure {
        Procedure::Coup => {
            let sampler = spec.sampler(built.runtime.as_ref())?;
            result
                .certificates
                .iter()
                .map(|c| {
                    let opt = sampler.opt_gamma(truth.as_ref(), u, c.gamma)?;
                    let got = truth.true_utility(c.incumbent_config, u)?;
                    Ok(got < opt - c.epsilon - TRUTH_TOLERANCE)
                })
                .collect()
        }
        _ => {
            let s = &result.summary;
            let (Some(arm), Some(eps)) = (s.certified_incumbent, s.eps_min) else {
                return Ok(vec![false]);
            };
            let utilities = result
                .pool_configs
                .iter()
                .map(|&c| truth.true_utility(c, u))
                .collect::<Result<Vec<_>>>()?;
            let best = utilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok(vec![best - utilities[arm] > eps + TRUTH_TOLERANCE])
        }
    }
}

/// Runs `trials` seeded replicas of `template` (seeds `seed, seed+1, …`)
/// in parallel and measures how often the returned certificate is wrong:
/// ε-optimality for OUP, UP and naive, `(ε_p, γ_p)`-optimality per phase
/// for COUP. Passes when every rate is at most [`failure_threshold`].
pub fn validate_guarantee(template: &ExperimentSpec, trials: usize) -> Result<ValidationReport> {
    if trials < 100 {
        return Err(Error::spec("trials", format!("at least 100 trials are needed, got {trials}")));
    }
    if matches!(template.oracle, OracleSpec::Dataset { .. }) {
        return Err(Error::NotImplemented("validation needs a synthetic oracle with analytic ground truth".into()));
    }
    if template.procedure == Procedure::Sh {
        return Err(Error::NotImplemented("successive halving issues no certificate".into()));
    }
    template.validate()?;
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| trial(&template.with_seed(template.seed.wrapping_add(t))))
        .collect::<Result<Vec<_>>>()?;

    let width = outcomes.iter().map(Vec::len).max().unwrap_or(0);
    let groups: Vec<ValidationGroup> = (0..width)
        .map(|k| {
            let hits: Vec<bool> = outcomes.iter().filter_map(|o| o.get(k).copied()).collect();
            let failures = hits.iter().filter(|&&v| v).count();
            let label = if template.procedure == Procedure::Coup {
                format!("phase {}", k + 1)
            } else {
                "all".to_string()
            };
            ValidationGroup { label, trials: hits.len(), failures, rate: failures as f64 / hits.len() as f64 }
        })
        .collect();
    let threshold = failure_threshold(template.delta, trials);
    let passed = groups.iter().all(|g| g.rate <= failure_threshold(template.delta, g.trials));
    Ok(ValidationReport { procedure: template.procedure, trials, delta: template.delta, threshold, groups, passed })
}

