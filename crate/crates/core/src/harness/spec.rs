use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{Captime, DoublingRule};
use crate::coup::{ConfigSampler, PhaseStop, Schedule};
use crate::oracle::{load_runtime_matrix, FamilySpec, GroundTruth, RuntimeOracle};
use crate::oup::StopRule;
use crate::rng::mix_seed;
use crate::utility::UtilityFunction;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Oup,
    Coup,
    Up,
    Naive,
    Sh,
}

impl Procedure {
    pub const ALL: [Procedure; 5] =
        [Procedure::Oup, Procedure::Coup, Procedure::Up, Procedure::Naive, Procedure::Sh];

    pub fn name(self) -> &'static str {
        match self {
            Procedure::Oup => "oup",
            Procedure::Coup => "coup",
            Procedure::Up => "up",
            Procedure::Naive => "naive",
            Procedure::Sh => "sh",
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Procedure::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::spec("procedure", format!("expected one of oup, coup, up, naive, sh; got `{s}`")))
    }
}

/// Where runtimes come from. Seeds are taken from the experiment seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    /// Runtime-matrix CSV.
    Dataset { path: PathBuf },
    /// Synthetic family spec file.
    FamilyFile { path: PathBuf },
    /// Synthetic family given inline.
    Family { family: FamilySpec },
}

/// How COUP draws configurations from a finite population.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    WithReplacement,
    WithoutReplacement,
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "with_replacement" | "with" => Ok(Sampling::WithReplacement),
            "without_replacement" | "without" => Ok(Sampling::WithoutReplacement),
            other => Err(Error::spec("sampling", format!("unknown sampling mode `{other}`"))),
        }
    }
}

fn default_delta() -> f64 {
    0.01
}

/// Everything needed to replay one run.
///
/// `stop` is read according to the procedure:
///
/// | procedure | stop                                               |
/// |-----------|----------------------------------------------------|
/// | oup, up   | `epsilon:E`, `budget:B`, `survivor`, `rounds:R`    |
/// | coup      | `phases:P`, `budget:B`, `rounds:R`                 |
/// | naive     | `epsilon:E`                                        |
/// | sh        | `runs:N` (total run budget)                        |
///
/// Lists are comma-separated and stop at the first rule that fires.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub procedure: Procedure,
    pub oracle: OracleSpec,
    #[serde(default)]
    pub utility: UtilityFunction,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub doubling: DoublingRule,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub sampling: Sampling,
    pub stop: String,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
    /// Successive Halving elimination factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<usize>,
    /// Successive Halving captime; defaults to the smallest power of two
    /// at or above κ0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captime: Option<f64>,
}

/// Parsed stop rule of a spec.
#[derive(Clone, Debug, PartialEq)]
pub enum StopSpec {
    Sequential(StopRule),
    Phases(PhaseStop),
    Epsilon(f64),
    Runs(u64),
}

/// Oracle built from a spec, with ground truth when it has one.
#[derive(Clone)]
pub struct BuiltOracle {
    pub runtime: Arc<dyn RuntimeOracle>,
    pub truth: Option<Arc<dyn GroundTruth>>,
}

impl ExperimentSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ExperimentSpec =
            serde_json::from_str(&text).map_err(|e| Error::spec("spec", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ExperimentSpec { seed, ..self.clone() }
    }

    /// Field-level checks that do not touch the file system.
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::spec("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        let u = &self.utility;
        let check = match *u {
            UtilityFunction::LogLaplace { kappa0, a } => UtilityFunction::log_laplace(kappa0, a),
            UtilityFunction::Uniform { kappa0 } => UtilityFunction::uniform(kappa0),
        };
        check.map_err(|e| Error::spec("utility", e.to_string()))?;
        if self.procedure == Procedure::Coup {
            self.schedule.at(1).map_err(|e| Error::spec("schedule", e.to_string()))?;
        }
        if let Some(eta) = self.eta {
            if eta < 2 {
                return Err(Error::spec("eta", format!("must be at least 2, got {eta}")));
            }
        }
        if let Some(c) = self.captime {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::spec("captime", format!("must be positive, got {c}")));
            }
        }
        if self.output.as_os_str().is_empty() {
            return Err(Error::spec("output", "empty path"));
        }
        self.stop_spec()?;
        Ok(())
    }

    pub fn stop_spec(&self) -> Result<StopSpec> {
        let wrap = |e: Error| match e {
            Error::Spec { .. } => e,
            other => Error::spec("stop", other.to_string()),
        };
        match self.procedure {
            Procedure::Oup | Procedure::Up => Ok(StopSpec::Sequential(self.stop.parse().map_err(wrap)?)),
            Procedure::Coup => Ok(StopSpec::Phases(self.stop.parse().map_err(wrap)?)),
            Procedure::Naive => match self.stop.parse::<StopRule>().map_err(wrap)? {
                StopRule::TargetEpsilon(e) if e > 0.0 => Ok(StopSpec::Epsilon(e)),
                _ => Err(Error::spec("stop", "naive needs `epsilon:E` with E > 0")),
            },
            Procedure::Sh => {
                let n = self
                    .stop
                    .trim()
                    .strip_prefix("runs:")
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .ok_or_else(|| Error::spec("stop", "sh needs `runs:N`"))?;
                Ok(StopSpec::Runs(n))
            }
        }
    }

    /// Successive Halving captime, resolved.
    pub fn sh_captime(&self) -> Result<f64> {
        match self.captime {
            Some(c) => Ok(c),
            None => {
                let mut k = Captime::INITIAL;
                while k.seconds() < self.utility.kappa0() {
                    k = k.doubled();
                }
                Ok(k.seconds())
            }
        }
    }

    /// Builds the oracle; the experiment seed replaces any seed in the
    /// oracle description.
    pub fn build_oracle(&self) -> Result<BuiltOracle> {
        match &self.oracle {
            OracleSpec::Dataset { path } => {
                let d = Arc::new(load_runtime_matrix(path, self.seed)?);
                Ok(BuiltOracle { runtime: d.clone(), truth: Some(d) })
            }
            OracleSpec::FamilyFile { path } => Ok(build_family(&FamilySpec::load(path)?, self.seed)),
            OracleSpec::Family { family } => Ok(build_family(family, self.seed)),
        }
    }

    /// True when the oracle's ground truth is analytic rather than a
    /// dataset-wide proxy.
    pub fn has_analytic_truth(&self) -> bool {
        !matches!(self.oracle, OracleSpec::Dataset { .. })
    }

    pub fn sampler(&self, oracle: &dyn RuntimeOracle) -> Result<ConfigSampler> {
        let seed = mix_seed(self.seed, 1);
        match (oracle.num_configs(), self.sampling) {
            (None, _) => Ok(ConfigSampler::Unbounded),
            (Some(n), Sampling::WithReplacement) => ConfigSampler::with_replacement(n, seed),
            (Some(n), Sampling::WithoutReplacement) => ConfigSampler::without_replacement(n, seed),
        }
    }
}

fn build_family(family: &FamilySpec, seed: u64) -> BuiltOracle {
    match family.with_seed(seed) {
        FamilySpec::Finite(f) => {
            let f = Arc::new(f);
            BuiltOracle { runtime: f.clone(), truth: Some(f) }
        }
        FamilySpec::Parametric(f) => {
            let f = Arc::new(f);
            BuiltOracle { runtime: f.clone(), truth: Some(f) }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_json(stop: &str, procedure: &str) -> String {
        format!(
            r#"{{
                "procedure": "{procedure}",
                "oracle": {{"kind": "family", "family": {{"kind": "parametric", "lo": 1.0, "hi": 50.0, "seed": 0}}}},
                "stop": "{stop}",
                "seed": 3,
                "output": "out"
            }}"#
        )
    }

    #[test]
    fn defaults_fill_in() {
        let spec: ExperimentSpec = serde_json::from_str(&spec_json("phases:2", "coup")).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.delta, 0.01);
        assert_eq!(spec.utility, UtilityFunction::default());
        assert_eq!(spec.schedule, Schedule::Default);
        assert_eq!(spec.stop_spec().unwrap(), StopSpec::Phases(PhaseStop::MaxPhases(2)));
    }

    #[test]
    fn stop_must_match_procedure() {
        let spec: ExperimentSpec = serde_json::from_str(&spec_json("phases:2", "oup")).unwrap();
        match spec.validate() {
            Err(Error::Spec { field, .. }) => assert_eq!(field, "stop"),
            other => panic!("unexpected {other:?}"),
        }
        let spec: ExperimentSpec = serde_json::from_str(&spec_json("runs:100", "sh")).unwrap();
        assert_eq!(spec.stop_spec().unwrap(), StopSpec::Runs(100));
    }

    #[test]
    fn bad_delta_names_the_field() {
        let mut spec: ExperimentSpec = serde_json::from_str(&spec_json("epsilon:0.2", "oup")).unwrap();
        spec.delta = 1.5;
        match spec.validate() {
            Err(Error::Spec { field, .. }) => assert_eq!(field, "delta"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trips_through_json() {
        let spec: ExperimentSpec = serde_json::from_str(&spec_json("epsilon:0.2,rounds:100", "up")).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentSpec>(&text).unwrap(), spec);
    }

    #[test]
    fn sh_captime_default() {
        let mut spec: ExperimentSpec = serde_json::from_str(&spec_json("runs:100", "sh")).unwrap();
        assert_eq!(spec.sh_captime().unwrap(), 64.0);
        spec.captime = Some(10.0);
        assert_eq!(spec.sh_captime().unwrap(), 10.0);
    }
}
