use std::fs;
use std::path::Path;
use std::sync::Arc;

use coup_core::baselines::UpRun;
use coup_core::bounds::DoublingRule;
use coup_core::coup::Schedule;
use coup_core::harness::{
    epsilon_vs_time_curve, load_run, per_config_time_profile, run_experiment, validate_guarantee,
    ExperimentSpec, LabeledTrace, OracleSpec, Procedure, Sampling, CERTIFICATE_FILE, PROFILE_FILE,
    SUMMARY_FILE, TRACE_FILE,
};
use coup_core::oracle::{FamilySpec, RuntimeDist, SyntheticFamily};
use coup_core::oup::{OupOptions, OupRun, StopRule};
use coup_core::utility::UtilityFunction;
use coup_core::Error;
use tempfile::TempDir;

const TWO_ARMS: &str = "family = two_point\nparams = 0.5 4 0.9; 0.5 inf 0.3\n";
const MIXED: &str = "family = mixed\nparams = exponential 2; exponential 40; two_point 1 inf 0.6; two_point 3 500 0.8; lognormal 1 1\n";
const PARAMETRIC: &str = "family = parametric_exponential\nparams = 1 200\n";

fn spec(procedure: Procedure, family: &str, stop: &str, out: &Path) -> ExperimentSpec {
    ExperimentSpec {
        procedure,
        oracle: OracleSpec::Family { family: FamilySpec::parse(family).unwrap() },
        utility: UtilityFunction::default(),
        delta: 0.1,
        doubling: DoublingRule::Old,
        schedule: Schedule::Default,
        sampling: Sampling::WithReplacement,
        stop: stop.into(),
        seed: 3,
        output: out.to_path_buf(),
        eta: None,
        captime: None,
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn identical_specs_write_identical_files() {
    let tmp = TempDir::new().unwrap();
    for (proc, family, stop) in [
        (Procedure::Oup, MIXED, "epsilon:0.2"),
        (Procedure::Up, MIXED, "epsilon:0.3"),
        (Procedure::Coup, PARAMETRIC, "phases:2"),
        (Procedure::Naive, MIXED, "epsilon:0.5"),
        (Procedure::Sh, MIXED, "runs:500"),
    ] {
        let a = spec(proc, family, stop, &tmp.path().join(format!("{proc}-a")));
        let b = ExperimentSpec { output: tmp.path().join(format!("{proc}-b")), ..a.clone() };
        run_experiment(&a).unwrap();
        run_experiment(&b).unwrap();
        let (fa, fb) = (files(&a.output), files(&b.output));
        assert!(fa.iter().any(|(n, _)| n == TRACE_FILE) && fa.iter().any(|(n, _)| n == SUMMARY_FILE));
        assert!(fa.iter().any(|(n, _)| n == PROFILE_FILE));
        // Summaries embed the output path; compare everything else exactly.
        for ((na, xa), (nb, xb)) in fa.iter().zip(&fb) {
            assert_eq!(na, nb);
            if na != SUMMARY_FILE {
                assert_eq!(xa, xb, "{proc}: {na} differs");
            }
        }
    }
}

#[test]
fn coup_writes_one_certificate_row_per_phase() {
    let tmp = TempDir::new().unwrap();
    let s = spec(Procedure::Coup, PARAMETRIC, "phases:3", tmp.path());
    let result = run_experiment(&s).unwrap();
    assert_eq!(result.certificates.len(), 3);
    assert_eq!(result.summary.phases_completed, Some(3));
    let text = fs::read_to_string(tmp.path().join(CERTIFICATE_FILE)).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header = rows.headers().unwrap().clone();
    for col in ["phase", "epsilon_p", "gamma_p", "n_p", "incumbent_name", "incumbent_LCB", "ledger_seconds"] {
        assert!(header.iter().any(|h| h == col), "missing column {col}");
    }
    assert_eq!(rows.records().count(), 3);
}

#[test]
fn oup_two_arm_run_reaches_its_target() {
    let tmp = TempDir::new().unwrap();
    let s = spec(Procedure::Oup, TWO_ARMS, "epsilon:0.2", tmp.path());
    let result = run_experiment(&s).unwrap();
    assert!(result.trace.last().unwrap().eps_min <= 0.2);
    assert!(result.summary.eps_min.unwrap() <= 0.2);
    let (summary, trace) = load_run(tmp.path()).unwrap();
    assert_eq!(summary, result.summary);
    assert_eq!(trace.records, result.trace);
    assert_eq!(trace.procedure, "oup");
}

fn paired_runs(tmp: &Path) -> (LabeledTrace, LabeledTrace) {
    let oup = spec(Procedure::Oup, MIXED, "epsilon:0.2", &tmp.join("oup"));
    let up = spec(Procedure::Up, MIXED, "epsilon:0.2", &tmp.join("up"));
    run_experiment(&oup).unwrap();
    run_experiment(&up).unwrap();
    (load_run(&oup.output).unwrap().1, load_run(&up.output).unwrap().1)
}

#[test]
fn curves_are_aligned_and_non_increasing() {
    let tmp = TempDir::new().unwrap();
    let (oup, up) = paired_runs(tmp.path());
    let table = epsilon_vs_time_curve(&[oup.clone(), up.clone()]).unwrap();
    assert_eq!(table.procedures, vec!["oup", "up"]);
    assert!(table.times.windows(2).all(|w| w[0] < w[1]));
    for col in &table.columns {
        assert_eq!(col.len(), table.times.len());
        let values: Vec<f64> = col.iter().flatten().copied().collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
        // Once started, a column never goes blank.
        let first = col.iter().position(Option::is_some).unwrap();
        assert!(col[first..].iter().all(Option::is_some));
    }
    let t_oup = table.time_to("oup", 0.2).unwrap();
    let t_up = table.time_to("up", 0.2).unwrap();
    assert_eq!(t_oup, oup.records.iter().find(|r| r.eps_min <= 0.2).unwrap().ledger_seconds);
    assert_eq!(t_up, up.records.iter().find(|r| r.eps_min <= 0.2).unwrap().ledger_seconds);
}

#[test]
fn single_curve_passes_through() {
    let tmp = TempDir::new().unwrap();
    let (oup, _) = paired_runs(tmp.path());
    let table = epsilon_vs_time_curve(std::slice::from_ref(&oup)).unwrap();
    let mut expected: Vec<(f64, f64)> = Vec::new();
    for r in &oup.records {
        match expected.last_mut() {
            Some(last) if last.0 == r.ledger_seconds => last.1 = r.eps_min,
            _ => expected.push((r.ledger_seconds, r.eps_min)),
        }
    }
    let got: Vec<(f64, f64)> = table.times.iter().zip(&table.columns[0]).map(|(&t, e)| (t, e.unwrap())).collect();
    assert_eq!(got, expected);
}

#[test]
fn empty_and_mismatched_curves() {
    let empty = epsilon_vs_time_curve(&[]).unwrap();
    assert!(empty.procedures.is_empty() && empty.times.is_empty());
    let blank = LabeledTrace { procedure: "oup".into(), key: "k".into(), records: Vec::new() };
    let table = epsilon_vs_time_curve(&[blank]).unwrap();
    assert!(table.times.is_empty());
    assert_eq!(table.columns, vec![Vec::<Option<f64>>::new()]);

    let tmp = TempDir::new().unwrap();
    let (oup, _) = paired_runs(tmp.path());
    let other = spec(Procedure::Up, MIXED, "epsilon:0.2", &tmp.path().join("other"));
    run_experiment(&other.with_seed(4)).unwrap();
    let other = load_run(&other.output).unwrap().1;
    assert!(matches!(epsilon_vs_time_curve(&[oup, other]), Err(Error::Comparison(_))));
}

#[test]
fn eliminated_arm_stops_accruing_time() {
    let pool = vec![
        RuntimeDist::Exponential { mean: 5.0 },
        RuntimeDist::TwoPoint { t1: 1000.0, t2: 1000.0, p: 1.0 },
    ];
    let u = UtilityFunction::default();
    let fam = Arc::new(SyntheticFamily::new(pool, 0).unwrap());
    let mut run = OupRun::new(fam.clone(), &[0, 1], u, OupOptions::with_delta(0.1)).unwrap();
    run.run_until(&StopRule::Any(vec![StopRule::SingleSurvivor, StopRule::MaxRounds(200_000)])).unwrap();
    assert_eq!(run.survivors(), &[0]);
    let frozen = run.ledger().seconds_for(1);
    for _ in 0..2000 {
        run.step().unwrap();
    }
    assert_eq!(run.ledger().seconds_for(1), frozen);
    let rows = per_config_time_profile(&[0, 1], run.ledger(), fam.as_ref(), fam.as_ref(), &u).unwrap();
    assert_eq!(rows.iter().map(|r| r.arm).collect::<Vec<_>>(), vec![0, 1]);
    assert!(rows[0].true_utility - rows[1].true_utility >= 0.9);
    assert!(rows[0].seconds > rows[1].seconds);
}

#[test]
fn identical_arms_share_time_under_round_robin() {
    let pool = vec![RuntimeDist::TwoPoint { t1: 2.0, t2: 2.0, p: 1.0 }; 6];
    let u = UtilityFunction::default();
    let fam = Arc::new(SyntheticFamily::new(pool, 0).unwrap());
    let configs: Vec<usize> = (0..6).collect();
    let mut run = UpRun::new(fam.clone(), &configs, u, OupOptions::with_delta(0.1)).unwrap();
    for _ in 0..1003 {
        run.step().unwrap();
    }
    let rows = per_config_time_profile(&configs, run.ledger(), fam.as_ref(), fam.as_ref(), &u).unwrap();
    let secs: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    let (lo, hi) = secs.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &s| (l.min(s), h.max(s)));
    assert!(hi - lo <= 2.0, "{secs:?}");
    assert_eq!(rows.iter().map(|r| r.arm).collect::<Vec<_>>(), configs);
}

#[test]
fn validation_passes_on_synthetic_families() {
    let tmp = TempDir::new().unwrap();
    let oup = spec(Procedure::Oup, TWO_ARMS, "epsilon:0.1", tmp.path());
    let report = validate_guarantee(&oup, 200).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(report.worst_rate() <= 0.1);

    let naive = spec(Procedure::Naive, MIXED, "epsilon:0.3", tmp.path());
    assert!(validate_guarantee(&naive, 200).unwrap().passed);

    let coup = ExperimentSpec { delta: 0.05, ..spec(Procedure::Coup, PARAMETRIC, "phases:3", tmp.path()) };
    let report = validate_guarantee(&coup, 200).unwrap();
    assert!(report.passed, "{report:?}");
    assert_eq!(report.groups.len(), 3);
    assert!(report.groups.iter().all(|g| g.trials == 200));
}

#[test]
fn validation_refuses_what_it_cannot_check() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("m.csv");
    fs::write(&csv, "config,i0,i1\na,1,2\nb,3,4\n").unwrap();
    let mut s = spec(Procedure::Oup, TWO_ARMS, "epsilon:0.2", tmp.path());
    assert!(matches!(validate_guarantee(&s, 50), Err(Error::Spec { field, .. }) if field == "trials"));
    s.oracle = OracleSpec::Dataset { path: csv };
    assert!(matches!(validate_guarantee(&s, 200), Err(Error::NotImplemented(_))));
    let sh = spec(Procedure::Sh, MIXED, "runs:100", tmp.path());
    assert!(matches!(validate_guarantee(&sh, 200), Err(Error::NotImplemented(_))));
}

fn field_of(err: Error) -> String {
    match err {
        Error::Spec { field, .. } => field,
        other => panic!("expected a spec error, got {other:?}"),
    }
}

#[test]
fn spec_errors_name_the_field() {
    let tmp = TempDir::new().unwrap();
    let base = spec(Procedure::Oup, TWO_ARMS, "epsilon:0.2", tmp.path());
    let cases = [
        (ExperimentSpec { delta: 1.5, ..base.clone() }, "delta"),
        (ExperimentSpec { stop: "epsilon:x".into(), ..base.clone() }, "stop"),
        (ExperimentSpec { procedure: Procedure::Coup, stop: "epsilon:0.2".into(), ..base.clone() }, "stop"),
        (ExperimentSpec { procedure: Procedure::Sh, stop: "phases:2".into(), ..base.clone() }, "stop"),
        (ExperimentSpec { eta: Some(1), ..base.clone() }, "eta"),
        (ExperimentSpec { captime: Some(-1.0), ..base.clone() }, "captime"),
        (ExperimentSpec { output: "".into(), ..base.clone() }, "output"),
        (ExperimentSpec { utility: UtilityFunction::Uniform { kappa0: -3.0 }, ..base.clone() }, "utility"),
    ];
    for (s, field) in cases {
        assert_eq!(field_of(s.validate().unwrap_err()), field);
        assert_eq!(field_of(run_experiment(&s).unwrap_err()), field);
    }

    let path = tmp.path().join("spec.json");
    fs::write(&path, r#"{"procedure": "oup", "oracle": {"kind": "family_file", "path": "f"}, "stop": "epsilon:0.2", "output": "o", "colour": 1}"#).unwrap();
    assert_eq!(field_of(ExperimentSpec::load(&path).unwrap_err()), "spec");
    fs::write(&path, r#"{"procedure": "fastest", "oracle": {"kind": "family_file", "path": "f"}, "stop": "epsilon:0.2", "output": "o"}"#).unwrap();
    assert_eq!(field_of(ExperimentSpec::load(&path).unwrap_err()), "spec");
}

#[test]
fn specs_round_trip_through_json() {
    let tmp = TempDir::new().unwrap();
    let s = ExperimentSpec {
        schedule: Schedule::Default,
        doubling: DoublingRule::New,
        eta: Some(4),
        ..spec(Procedure::Coup, PARAMETRIC, "phases:2,budget:1e6", tmp.path())
    };
    let path = tmp.path().join("spec.json");
    fs::write(&path, serde_json::to_string_pretty(&s).unwrap()).unwrap();
    assert_eq!(ExperimentSpec::load(&path).unwrap(), s);
}
