//! Experiment orchestration: replayable specs, trace and summary emission,
//! ε-versus-time curves, per-configuration time profiles and Monte Carlo
//! validation of the guarantees.
//!
//! All time is simulated ledger time; nothing here reads a wall clock.

mod clean;
mod curve;
mod profile;
mod run;
mod spec;
mod validate;

use std::fs::File;
use std::path::Path;

pub use clean::CleanMonitor;
pub use curve::{epsilon_vs_time_curve, CurveTable, LabeledTrace};
pub use profile::{per_config_time_profile, write_profile_csv, ProfileRow};
pub use run::{
    execute, run_experiment, ExperimentResult, Summary, CERTIFICATE_FILE, PROFILE_FILE, SUMMARY_FILE,
    TRACE_FILE,
};
pub use spec::{BuiltOracle, ExperimentSpec, OracleSpec, Procedure, Sampling, StopSpec};
pub use validate::{failure_threshold, validate_guarantee, ValidationGroup, ValidationReport};

use crate::trace::read_trace_csv;
use crate::Result;

/// Reads `trace.csv` and `summary.json` from a run directory. The
/// comparison key covers the oracle, utility, δ and seed.
pub fn load_run(dir: impl AsRef<Path>) -> Result<(Summary, LabeledTrace)> {
    let dir = dir.as_ref();
    let summary: Summary = serde_json::from_reader(File::open(dir.join(SUMMARY_FILE))?)?;
    let (procedure, records) = read_trace_csv(File::open(dir.join(TRACE_FILE))?)?;
    let procedure = if procedure.is_empty() { summary.procedure.to_string() } else { procedure };
    let key = serde_json::to_string(&(
        &summary.spec.oracle,
        &summary.spec.utility,
        summary.spec.delta,
        summary.seed,
    ))?;
    Ok((summary, LabeledTrace { procedure, key, records }))
}
