//! `coup`: run, sweep, validate and compare utilitarian configuration
//! experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use coup_core::bounds::DoublingRule;
use coup_core::coup::Schedule;
use coup_core::harness::{
    epsilon_vs_time_curve, load_run, run_experiment, validate_guarantee, ExperimentSpec, OracleSpec,
    Procedure, Sampling,
};
use coup_core::oracle::FamilySpec;
use coup_core::utility::UtilityFunction;
use coup_core::Error;

const OUT_DIR_ENV: &str = "COUP_OUT_DIR";

const EXIT_FAILURE: u8 = 1;
const EXIT_SPEC: u8 = 2;
const EXIT_EXHAUSTED: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(name = "coup", version, about = "Utilitarian algorithm configuration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv, summary.json, profile.csv
    /// (and certificates.csv for coup) into the output directory.
    Run(SpecArgs),
    /// Run a grid of seeds and procedures; each run gets its own directory.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        /// Seeds: a range `0..10` or a list `1,2,5`.
        #[arg(long, default_value = "0..10")]
        seeds: String,
        /// Comma-separated procedures; defaults to the spec's procedure.
        #[arg(long)]
        procedures: Option<String>,
    },
    /// Monte Carlo check of the returned certificates against ground truth.
    Validate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Align the ε-versus-time curves of several run directories.
    Curve {
        /// Run directories (each holding trace.csv and summary.json).
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Spec fields; flags override a `--spec` file.
#[derive(Args, Clone)]
struct SpecArgs {
    /// JSON experiment spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// oup, coup, up, naive or sh.
    #[arg(long)]
    procedure: Option<Procedure>,
    /// Runtime-matrix CSV.
    #[arg(long, conflicts_with = "family")]
    dataset: Option<PathBuf>,
    /// Synthetic family spec file.
    #[arg(long)]
    family: Option<PathBuf>,
    /// `loglaplace:K0:A` or `uniform:K0`.
    #[arg(long)]
    utility: Option<UtilityFunction>,
    #[arg(long)]
    delta: Option<f64>,
    /// old or new.
    #[arg(long)]
    doubling: Option<DoublingRule>,
    /// Preset name, `custom:eps=e^-p/6,gamma=e^-p/3` or `seq:eps=..,gamma=..`.
    #[arg(long)]
    schedule: Option<Schedule>,
    /// with_replacement or without_replacement.
    #[arg(long)]
    sampling: Option<Sampling>,
    /// Stop rule, e.g. `epsilon:0.2`, `phases:3`, `runs:1000`.
    #[arg(long)]
    stop: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overridden by COUP_OUT_DIR).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Successive Halving elimination factor.
    #[arg(long)]
    eta: Option<usize>,
    /// Successive Halving captime in seconds.
    #[arg(long)]
    captime: Option<f64>,
}

fn spec_error(field: &str, msg: impl Into<String>) -> anyhow::Error {
    Error::Spec { field: field.into(), msg: msg.into() }.into()
}

impl SpecArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let base = match &self.spec {
            Some(path) => Some(ExperimentSpec::load(path).map_err(|e| match e {
                Error::Io(io) => spec_error("spec", format!("{}: {io}", path.display())),
                other => other.into(),
            })?),
            None => None,
        };
        let oracle = match (&self.dataset, &self.family) {
            (Some(path), _) => Some(OracleSpec::Dataset { path: path.clone() }),
            (_, Some(path)) => {
                let family = FamilySpec::load(path).map_err(|e| match e {
                    Error::Io(io) => spec_error("family", format!("{}: {io}", path.display())),
                    other => other.into(),
                })?;
                Some(OracleSpec::Family { family })
            }
            _ => None,
        };
        let procedure = self.procedure.or(base.as_ref().map(|b| b.procedure));
        let mut spec = match base {
            Some(b) => b,
            None => ExperimentSpec {
                procedure: procedure.ok_or_else(|| spec_error("procedure", "missing"))?,
                oracle: oracle.clone().ok_or_else(|| spec_error("oracle", "give --dataset or --family"))?,
                utility: UtilityFunction::default(),
                delta: 0.01,
                doubling: DoublingRule::Old,
                schedule: Schedule::Default,
                sampling: Sampling::WithReplacement,
                stop: self.stop.clone().ok_or_else(|| spec_error("stop", "missing"))?,
                seed: 0,
                output: PathBuf::from("out"),
                eta: None,
                captime: None,
            },
        };
        if let Some(p) = procedure {
            spec.procedure = p;
        }
        if let Some(o) = oracle {
            spec.oracle = o;
        }
        if let Some(u) = self.utility {
            spec.utility = u;
        }
        if let Some(d) = self.delta {
            spec.delta = d;
        }
        if let Some(d) = self.doubling {
            spec.doubling = d;
        }
        if let Some(s) = &self.schedule {
            spec.schedule = s.clone();
        }
        if let Some(s) = self.sampling {
            spec.sampling = s;
        }
        if let Some(s) = &self.stop {
            spec.stop = s.clone();
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(o) = &self.output {
            spec.output = o.clone();
        }
        if self.eta.is_some() {
            spec.eta = self.eta;
        }
        if self.captime.is_some() {
            spec.captime = self.captime;
        }
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
            spec.output = PathBuf::from(dir);
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || spec_error("seeds", format!("expected `A..B` or a comma list, got `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn print_summary(dir: &Path, summary: &coup_core::harness::Summary) {
    let eps = summary.eps_min.map(|e| format!("{e:.6}")).unwrap_or_else(|| "-".into());
    let name = summary.incumbent_name.as_deref().unwrap_or("-");
    println!(
        "{} seed={} incumbent={} eps={} ledger_seconds={} rounds={} -> {}",
        summary.procedure,
        summary.seed,
        name,
        eps,
        summary.ledger_seconds,
        summary.rounds,
        dir.display()
    );
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let spec = args.resolve()?;
            let result = run_experiment(&spec)?;
            print_summary(&spec.output, &result.summary);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { spec: args, seeds, procedures } => {
            let base = args.resolve()?;
            let seeds = parse_seeds(&seeds)?;
            let procedures: Vec<Procedure> = match procedures {
                Some(list) => list.split(',').map(|p| p.parse()).collect::<Result<_, _>>()?,
                None => vec![base.procedure],
            };
            let mut rows = csv::Writer::from_writer(Vec::new());
            rows.write_record(["procedure", "seed", "eps_min", "ledger_seconds", "incumbent_name", "error"])?;
            let mut exhausted = false;
            for &procedure in &procedures {
                for &seed in &seeds {
                    let mut spec = base.clone();
                    spec.procedure = procedure;
                    spec.seed = seed;
                    spec.output = base.output.join(procedure.name()).join(format!("seed-{seed}"));
                    spec.validate()?;
                    let (summary, error) = match run_experiment(&spec) {
                        Ok(r) => (Some(r.summary), String::new()),
                        Err(e @ Error::InstanceExhausted { .. }) => {
                            exhausted = true;
                            (None, e.to_string())
                        }
                        Err(e) => return Err(e.into()),
                    };
                    if let Some(s) = &summary {
                        print_summary(&spec.output, s);
                    } else {
                        eprintln!("{procedure} seed={seed}: {error}");
                    }
                    rows.write_record([
                        procedure.name().to_string(),
                        seed.to_string(),
                        summary.as_ref().and_then(|s| s.eps_min).map(|e| e.to_string()).unwrap_or_default(),
                        summary.as_ref().map(|s| s.ledger_seconds.to_string()).unwrap_or_default(),
                        summary.as_ref().and_then(|s| s.incumbent_name.clone()).unwrap_or_default(),
                        error,
                    ])?;
                }
            }
            std::fs::create_dir_all(&base.output)?;
            let path = base.output.join("sweep.csv");
            std::fs::write(&path, rows.into_inner()?).with_context(|| format!("writing {}", path.display()))?;
            Ok(if exhausted { ExitCode::from(EXIT_EXHAUSTED) } else { ExitCode::SUCCESS })
        }
        Command::Validate { spec: args, trials } => {
            let spec = args.resolve()?;
            let report = validate_guarantee(&spec, trials)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VALIDATION) })
        }
        Command::Curve { runs, output } => {
            let traces = runs
                .iter()
                .map(|dir| load_run(dir).map(|(_, t)| t).with_context(|| format!("reading {}", dir.display())))
                .collect::<Result<Vec<_>>>()?;
            let table = epsilon_vs_time_curve(&traces)?;
            match output {
                Some(path) => {
                    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    table.write_csv(file)?;
                }
                None => table.write_csv(std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Spec { .. } | Error::Load { .. } | Error::Domain(_) | Error::PhaseUnsatisfiable { .. }) => EXIT_SPEC,
        Some(Error::UnreachableCaptime { .. }) => EXIT_SPEC,
        Some(Error::InstanceExhausted { .. }) => EXIT_EXHAUSTED,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
