use crate::bounds::Captime;
use crate::ledger::CostLedger;
use crate::oracle::RuntimeOracle;
use crate::trace::TraceRecord;
use crate::utility::UtilityFunction;
use crate::{Error, Result};

/// Result of the naive Hoeffding procedure.
#[derive(Clone, Debug, PartialEq)]
pub struct NaiveOutcome {
    /// Arm index (into the `configs` slice) with the largest empirical mean.
    pub incumbent: usize,
    pub captime: f64,
    pub m: u64,
    pub means: Vec<f64>,
    pub epsilon: f64,
    pub ledger: CostLedger,
    pub trace: Vec<TraceRecord>,
}

/// Smallest power-of-two captime `κ̄ ≥ 1` with `u(κ̄) ≤ ε/2`.
pub fn naive_captime(u: &UtilityFunction, epsilon: f64) -> Result<Captime> {
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let target = epsilon / 2.0;
    let mut kappa = Captime::INITIAL;
    for _ in 0..63 {
        if u.at(kappa.seconds()) <= target {
            return Ok(kappa);
        }
        kappa = kappa.doubled();
    }
    Err(Error::UnreachableCaptime { target })
}

/// `m = ⌈(2/ε²)·ln(2n/δ)⌉` samples per configuration.
pub fn naive_sample_count(n: usize, epsilon: f64, delta: f64) -> Result<u64> {
    if n == 0 {
        return Err(Error::domain("configuration pool is empty"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let m = (2.0 / (epsilon * epsilon) * (2.0 * n as f64 / delta).ln()).ceil();
    Ok(m.max(1.0) as u64)
}

/// Runs every configuration on the same `m` instances at captime `κ̄` and
/// returns the best empirical mean. One trace row is emitted per finished
/// configuration; ε stays 1 until the last one.
pub fn naive_run(
    oracle: &dyn RuntimeOracle,
    configs: &[usize],
    epsilon: f64,
    delta: f64,
    u: &UtilityFunction,
) -> Result<NaiveOutcome> {
    let captime = naive_captime(u, epsilon)?.seconds();
    let m = naive_sample_count(configs.len(), epsilon, delta)?;
    let mut ledger = CostLedger::new();
    let mut means = Vec::with_capacity(configs.len());
    let mut trace = Vec::with_capacity(configs.len());
    let mut incumbent = 0;
    for (k, &config) in configs.iter().enumerate() {
        let mut total_u = 0.0;
        let mut time = 0.0;
        for j in 0..m as usize {
            let obs = oracle.run(config, j, captime).map_err(|e| e.with_epsilon(1.0))?;
            total_u += u.at(obs.duration);
            time += obs.duration;
        }
        ledger.charge(k, time, m);
        let mean = total_u / m as f64;
        if k == 0 || mean > means[incumbent] {
            incumbent = k;
        }
        means.push(mean);
        let eps = if k + 1 == configs.len() { epsilon.min(1.0) } else { 1.0 };
        trace.push(TraceRecord {
            round: k as u64 + 1,
            ledger_seconds: ledger.total_seconds(),
            selected: k,
            doubled: false,
            eps_raw: eps,
            eps_min: eps,
            survivors: configs.len(),
            incumbent,
        });
    }
    Ok(NaiveOutcome { incumbent, captime, m, means, epsilon, ledger, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::RuntimeMatrixDataset;

    #[test]
    fn uniform_captime() {
        let u = UtilityFunction::uniform(60.0).unwrap();
        assert_eq!(naive_captime(&u, 0.2).unwrap().seconds(), 64.0);
        assert_eq!(naive_captime(&UtilityFunction::uniform(1.0).unwrap(), 2.0).unwrap().seconds(), 1.0);
    }

    #[test]
    fn log_laplace_captime() {
        // ½·60/κ ≤ 0.1 needs κ ≥ 300.
        let u = UtilityFunction::default();
        assert_eq!(naive_captime(&u, 0.2).unwrap().seconds(), 512.0);
    }

    #[test]
    fn sample_count() {
        assert_eq!(naive_sample_count(10, 0.2, 0.1).unwrap(), 265);
        let expect = (0.5 * (20.0f64 / 0.1).ln()).ceil() as u64;
        assert_eq!(naive_sample_count(10, 2.0, 0.1).unwrap(), expect);
    }

    #[test]
    fn picks_best_mean() {
        let rows = vec![vec![10.0; 300], vec![0.5; 300], vec![3.0; 300]];
        let names = vec!["slow".into(), "fast".into(), "mid".into()];
        let d = RuntimeMatrixDataset::from_rows(names, rows, 1).unwrap();
        let u = UtilityFunction::uniform(60.0).unwrap();
        let out = naive_run(&d, &[0, 1, 2], 0.2, 0.1, &u).unwrap();
        assert_eq!(out.incumbent, 1);
        assert_eq!(out.m, naive_sample_count(3, 0.2, 0.1).unwrap());
        assert_eq!(out.trace.len(), 3);
        assert_eq!(out.trace[2].eps_min, 0.2);
        assert_eq!(out.ledger.run_count(), 3 * out.m);
    }

    #[test]
    fn too_few_instances() {
        let d = RuntimeMatrixDataset::from_rows(vec!["a".into()], vec![vec![1.0; 5]], 1).unwrap();
        let u = UtilityFunction::uniform(60.0).unwrap();
        assert!(matches!(
            naive_run(&d, &[0], 0.2, 0.1, &u),
            Err(Error::InstanceExhausted { achieved_epsilon: Some(_), .. })
        ));
    }
}
