use crate::ledger::CostLedger;
use crate::oracle::RuntimeOracle;
use crate::utility::UtilityFunction;
use crate::{Error, Result};

/// Result of Successive Halving.
#[derive(Clone, Debug, PartialEq)]
pub struct HalvingOutcome {
    /// Arm index (into the `configs` slice) of the last survivor.
    pub incumbent: usize,
    /// Survivor count of each round.
    pub sizes: Vec<usize>,
    /// Cumulative runs per surviving arm at the end of each round.
    pub counts: Vec<u64>,
    pub means: Vec<f64>,
    pub ledger: CostLedger,
}

fn round_sizes(n: usize, eta: usize) -> Vec<usize> {
    let mut sizes = vec![n];
    while *sizes.last().unwrap() > 1 {
        let s = *sizes.last().unwrap();
        sizes.push(s.div_ceil(eta));
    }
    sizes
}

/// Successive Halving at a fixed captime. Round `k` brings every survivor
/// to `c₀·η^k` runs (earlier runs are reused), then keeps the best `⌈s/η⌉`
/// by empirical mean utility. `c₀` is the largest value that fits
/// `budget_runs`.
pub fn successive_halving(
    oracle: &dyn RuntimeOracle,
    configs: &[usize],
    budget_runs: u64,
    eta: usize,
    u: &UtilityFunction,
    captime: f64,
) -> Result<HalvingOutcome> {
    let n = configs.len();
    if n == 0 {
        return Err(Error::domain("configuration pool is empty"));
    }
    if eta < 2 {
        return Err(Error::domain(format!("eta must be at least 2, got {eta}")));
    }
    if !(captime > 0.0) {
        return Err(Error::domain(format!("captime must be positive, got {captime}")));
    }
    let sizes = round_sizes(n, eta);
    // Runs per unit of c₀.
    let mut unit = 0u64;
    let mut prev = 0u64;
    for (k, &s) in sizes.iter().enumerate() {
        let c = (eta as u64).pow(k as u32);
        unit += s as u64 * (c - prev);
        prev = c;
    }
    let c0 = budget_runs / unit;
    if c0 == 0 {
        return Err(Error::domain(format!(
            "budget of {budget_runs} runs is below the {unit} needed for {n} configurations at eta {eta}"
        )));
    }
    let counts: Vec<u64> = (0..sizes.len()).map(|k| c0 * (eta as u64).pow(k as u32)).collect();

    let mut ledger = CostLedger::new();
    let mut sums = vec![0.0; n];
    let mut done = vec![0u64; n];
    let mut survivors: Vec<usize> = (0..n).collect();
    for (k, &target) in counts.iter().enumerate() {
        for &a in &survivors {
            let mut time = 0.0;
            for j in done[a]..target {
                let obs = oracle.run(configs[a], j as usize, captime)?;
                sums[a] += u.at(obs.duration);
                time += obs.duration;
            }
            ledger.charge(a, time, target - done[a]);
            done[a] = target;
        }
        if k + 1 < sizes.len() {
            survivors.sort_by(|&x, &y| {
                let (mx, my) = (sums[x] / done[x] as f64, sums[y] / done[y] as f64);
                my.total_cmp(&mx).then(x.cmp(&y))
            });
            survivors.truncate(sizes[k + 1]);
            survivors.sort_unstable();
        }
    }
    let means = (0..n).map(|a| if done[a] > 0 { sums[a] / done[a] as f64 } else { 0.0 }).collect();
    Ok(HalvingOutcome { incumbent: survivors[0], sizes, counts, means, ledger })
}
