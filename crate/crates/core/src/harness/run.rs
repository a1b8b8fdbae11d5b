use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{naive_run, successive_halving, UpRun};
use crate::coup::{write_certificates_csv, CoupOptions, CoupRun, PhaseCertificate};
use crate::harness::profile::{per_config_time_profile, write_profile_csv};
use crate::harness::spec::{ExperimentSpec, Procedure, StopSpec};
use crate::ledger::CostLedger;
use crate::oup::{OupOptions, OupRun};
use crate::trace::{write_trace_csv, TraceRecord};
use crate::{Error, Result};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CERTIFICATE_FILE: &str = "certificates.csv";
pub const PROFILE_FILE: &str = "profile.csv";

/// Summary record of one run, written as `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub procedure: Procedure,
    pub seed: u64,
    /// Arm index of the final recommendation.
    pub incumbent: Option<usize>,
    pub incumbent_config: Option<usize>,
    pub incumbent_name: Option<String>,
    /// Incumbent at the round where `eps_min` was reached.
    pub certified_incumbent: Option<usize>,
    /// Final instantaneous ε (`None` for procedures without one).
    pub eps_final: Option<f64>,
    /// Best ε certified (per phase for COUP, the last phase's ε_p).
    pub eps_min: Option<f64>,
    pub eps_min_round: Option<u64>,
    pub rounds: u64,
    pub ledger_seconds: f64,
    pub run_count: u64,
    pub phases_completed: Option<usize>,
    /// Set when the run halted on an error; the trace is partial.
    pub error: Option<String>,
    pub spec: ExperimentSpec,
}

/// In-memory result of one run.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub summary: Summary,
    pub trace: Vec<TraceRecord>,
    pub certificates: Vec<PhaseCertificate>,
    pub ledger: CostLedger,
    /// Oracle configuration id of each arm.
    pub pool_configs: Vec<usize>,
}

/// Executes a spec without touching the output directory. On an engine
/// error the partial result is returned next to the error.
pub fn execute(spec: &ExperimentSpec) -> std::result::Result<ExperimentResult, (Error, Option<Box<ExperimentResult>>)> {
    spec.validate().map_err(|e| (e, None))?;
    let stop = spec.stop_spec().map_err(|e| (e, None))?;
    let built = spec.build_oracle().map_err(|e| (e, None))?;
    let oracle = built.runtime;
    let u = spec.utility;

    let mut summary = Summary {
        procedure: spec.procedure,
        seed: spec.seed,
        incumbent: None,
        incumbent_config: None,
        incumbent_name: None,
        certified_incumbent: None,
        eps_final: None,
        eps_min: None,
        eps_min_round: None,
        rounds: 0,
        ledger_seconds: 0.0,
        run_count: 0,
        phases_completed: None,
        error: None,
        spec: spec.clone(),
    };
    let finite_pool = || -> Result<Vec<usize>> {
        let n = oracle.num_configs().ok_or_else(|| {
            Error::spec("oracle", format!("{} needs a finite configuration pool", spec.procedure))
        })?;
        Ok((0..n).collect())
    };
    let opts = OupOptions { delta: spec.delta, doubling: spec.doubling, eliminate: true, context: None };

    macro_rules! sequential {
        ($run:expr, $rule:expr) => {{
            let mut run = $run;
            let status = run.run_until(&$rule);
            summary.rounds = run.round();
            summary.ledger_seconds = run.ledger().total_seconds();
            summary.run_count = run.ledger().run_count();
            summary.eps_min = Some(run.eps_min());
            summary.eps_final = run.guaranteed_epsilon().ok();
            if let Ok(o) = run.outcome() {
                summary.eps_min_round = Some(o.eps_min_round);
                summary.incumbent = Some(o.incumbent);
                summary.certified_incumbent = Some(o.certified_incumbent);
            }
            let configs: Vec<usize> = run.arms().iter().map(|a| a.config()).collect();
            (status.err(), run.trace().to_vec(), Vec::new(), run.ledger().clone(), configs)
        }};
    }

    let (error, trace, certificates, ledger, pool_configs) = match (spec.procedure, stop) {
        (Procedure::Oup, StopSpec::Sequential(rule)) => {
            let configs = finite_pool().map_err(|e| (e, None))?;
            sequential!(OupRun::new(oracle.clone(), &configs, u, opts).map_err(|e| (e, None))?, rule)
        }
        (Procedure::Up, StopSpec::Sequential(rule)) => {
            let configs = finite_pool().map_err(|e| (e, None))?;
            sequential!(UpRun::new(oracle.clone(), &configs, u, opts).map_err(|e| (e, None))?, rule)
        }
        (Procedure::Coup, StopSpec::Phases(rule)) => {
            let sampler = spec.sampler(oracle.as_ref()).map_err(|e| (e, None))?;
            let copts = CoupOptions {
                delta: spec.delta,
                doubling: spec.doubling,
                schedule: spec.schedule.clone(),
                terminate_phases: true,
            };
            let mut run = CoupRun::new(oracle.clone(), sampler, u, copts).map_err(|e| (e, None))?;
            let status = run.run_phases(&rule);
            let out = run.outcome();
            summary.rounds = out.rounds;
            summary.ledger_seconds = out.ledger_seconds;
            summary.run_count = run.ledger().run_count();
            summary.phases_completed = Some(out.certificates.len());
            summary.incumbent = out.recommendation;
            summary.certified_incumbent = out.recommendation;
            summary.eps_min = out.certificates.last().map(|c| c.epsilon);
            summary.eps_min_round = out.certificates.last().map(|c| c.round);
            summary.eps_final = run.guaranteed_epsilon().ok();
            (status.err(), run.trace().to_vec(), out.certificates, run.ledger().clone(), run.pool_configs())
        }
        (Procedure::Naive, StopSpec::Epsilon(eps)) => {
            let configs = finite_pool().map_err(|e| (e, None))?;
            match naive_run(oracle.as_ref(), &configs, eps, spec.delta, &u) {
                Ok(out) => {
                    summary.rounds = out.trace.len() as u64;
                    summary.ledger_seconds = out.ledger.total_seconds();
                    summary.run_count = out.ledger.run_count();
                    summary.incumbent = Some(out.incumbent);
                    summary.certified_incumbent = Some(out.incumbent);
                    summary.eps_final = Some(eps.min(1.0));
                    summary.eps_min = Some(eps.min(1.0));
                    summary.eps_min_round = Some(summary.rounds);
                    (None, out.trace, Vec::new(), out.ledger, configs)
                }
                Err(e) => (Some(e), Vec::new(), Vec::new(), CostLedger::new(), configs),
            }
        }
        (Procedure::Sh, StopSpec::Runs(budget)) => {
            let configs = finite_pool().map_err(|e| (e, None))?;
            let eta = spec.eta.unwrap_or(3);
            let captime = spec.sh_captime().map_err(|e| (e, None))?;
            match successive_halving(oracle.as_ref(), &configs, budget, eta, &u, captime) {
                Ok(out) => {
                    summary.rounds = out.sizes.len() as u64;
                    summary.ledger_seconds = out.ledger.total_seconds();
                    summary.run_count = out.ledger.run_count();
                    summary.incumbent = Some(out.incumbent);
                    (None, Vec::new(), Vec::new(), out.ledger, configs)
                }
                Err(e) => (Some(e), Vec::new(), Vec::new(), CostLedger::new(), configs),
            }
        }
        _ => unreachable!("stop_spec matches the procedure"),
    };

    if let Some(i) = summary.incumbent {
        let config = pool_configs[i];
        summary.incumbent_config = Some(config);
        summary.incumbent_name = Some(oracle.config_name(config));
    }
    summary.error = error.as_ref().map(|e| e.to_string());
    let result = ExperimentResult { summary, trace, certificates, ledger, pool_configs };
    match error {
        None => Ok(result),
        Some(e) => Err((e, Some(Box::new(result)))),
    }
}

fn write_outputs(spec: &ExperimentSpec, result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut trace = BufWriter::new(File::create(dir.join(TRACE_FILE))?);
    write_trace_csv(&mut trace, spec.procedure.name(), &result.trace)?;
    trace.flush()?;

    let mut summary = serde_json::to_string_pretty(&result.summary)?;
    summary.push('\n');
    fs::write(dir.join(SUMMARY_FILE), summary)?;

    if spec.procedure == Procedure::Coup {
        let mut certs = BufWriter::new(File::create(dir.join(CERTIFICATE_FILE))?);
        write_certificates_csv(&mut certs, &result.certificates)?;
        certs.flush()?;
    }

    let built = spec.build_oracle()?;
    if let Some(truth) = built.truth {
        let rows = per_config_time_profile(
            &result.pool_configs,
            &result.ledger,
            truth.as_ref(),
            built.runtime.as_ref(),
            &spec.utility,
        )?;
        let mut out = BufWriter::new(File::create(dir.join(PROFILE_FILE))?);
        write_profile_csv(&mut out, &rows)?;
        out.flush()?;
    }
    Ok(())
}

/// Executes a spec and writes `trace.csv`, `summary.json`, `profile.csv`
/// and, for COUP, `certificates.csv` into `spec.output`. A run that halts
/// on an oracle error still writes its partial trace and summary before the
/// error is returned.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    match execute(spec) {
        Ok(result) => {
            write_outputs(spec, &result, &spec.output)?;
            Ok(result)
        }
        Err((e, Some(partial))) => {
            write_outputs(spec, &partial, &spec.output)?;
            Err(e)
        }
        Err((e, None)) => Err(e),
    }
}
