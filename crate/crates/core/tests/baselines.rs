mod common;

use std::sync::Arc;

use coup_core::baselines::{naive_captime, naive_run, naive_sample_count, successive_halving, UpRun};
use coup_core::bounds::DoublingRule;
use coup_core::oracle::{RuntimeDist, RuntimeMatrixDataset, SyntheticFamily};
use coup_core::oup::{OupOptions, OupRun, StopRule};
use coup_core::utility::UtilityFunction;
use proptest::prelude::*;

fn ll() -> UtilityFunction {
    UtilityFunction::log_laplace(60.0, 1.0).unwrap()
}

fn family(pool: &[RuntimeDist], seed: u64) -> Arc<SyntheticFamily> {
    Arc::new(SyntheticFamily::new(pool.to_vec(), seed).unwrap())
}

fn opts(delta: f64, doubling: DoublingRule) -> OupOptions {
    OupOptions { delta, doubling, eliminate: true, context: None }
}

#[test]
fn round_robin_spends_at_least_as_many_pulls_on_the_bad_arm() {
    let pool = [
        RuntimeDist::Exponential { mean: 1.0 },
        RuntimeDist::TwoPoint { t1: 1000.0, t2: 1000.0, p: 1.0 },
    ];
    let (best, us) = common::utilities(&pool, &ll());
    assert!(best - us[1] >= 0.9);
    for seed in 0..10 {
        let stop = StopRule::Any(vec![StopRule::SingleSurvivor, StopRule::TargetEpsilon(0.05)]);
        let mut oup = OupRun::new(family(&pool, seed), &[0, 1], ll(), opts(0.05, DoublingRule::Old)).unwrap();
        oup.run_until(&stop).unwrap();
        let mut up = UpRun::new(family(&pool, seed), &[0, 1], ll(), opts(0.05, DoublingRule::Old)).unwrap();
        up.run_until(&stop).unwrap();
        assert!(up.arms()[1].m() >= oup.arms()[1].m(), "seed {seed}");
        assert_eq!(up.incumbent().unwrap(), 0);
    }
}

#[test]
fn naive_parameters() {
    // u(κ) = 30/κ above κ0 = 60 and 1 − κ/120 below it.
    assert_eq!(naive_captime(&ll(), 0.1).unwrap().seconds(), 1024.0);
    assert_eq!(naive_captime(&ll(), 1.5).unwrap().seconds(), 32.0);
    let m = (2.0 / 0.01 * (2.0 * 10.0 / 0.05f64).ln()).ceil() as u64;
    assert_eq!(naive_sample_count(10, 0.1, 0.05).unwrap(), m);
}

#[test]
fn naive_picks_the_best_deterministic_arm() {
    let pool = [
        RuntimeDist::TwoPoint { t1: 9.0, t2: 9.0, p: 1.0 },
        RuntimeDist::TwoPoint { t1: 2.0, t2: 2.0, p: 1.0 },
        RuntimeDist::TwoPoint { t1: 5000.0, t2: 5000.0, p: 1.0 },
    ];
    let out = naive_run(family(&pool, 0).as_ref(), &[0, 1, 2], 0.2, 0.1, &ll()).unwrap();
    assert_eq!(out.incumbent, 1);
    assert_eq!(out.ledger.run_count(), 3 * out.m);
    assert_eq!(out.means[2], ll().at(out.captime));
}

#[test]
fn halving_returns_the_fastest_deterministic_arm() {
    let runtimes = [7.0, 3.0, 12.0, 0.5, 40.0, 2.0, 90.0, 1.0, 25.0];
    let names = (0..runtimes.len()).map(|i| format!("c{i}")).collect();
    let rows = runtimes.iter().map(|&t| vec![t; 100]).collect();
    let ds = RuntimeMatrixDataset::from_rows(names, rows, 0).unwrap();
    let configs: Vec<usize> = (0..runtimes.len()).collect();
    for eta in [2, 3] {
        let out = successive_halving(&ds, &configs, 200, eta, &ll(), 64.0).unwrap();
        assert_eq!(out.incumbent, 3);
        assert!(out.ledger.run_count() <= 200);
        assert_eq!(*out.sizes.last().unwrap(), 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_robin_stays_balanced(seed in any::<u64>(), new_rule in any::<bool>()) {
        let pool = common::mixed_pool(seed);
        let rule = if new_rule { DoublingRule::New } else { DoublingRule::Old };
        let configs: Vec<usize> = (0..pool.len()).collect();
        let mut up = UpRun::new(family(&pool, seed), &configs, ll(), opts(0.1, rule)).unwrap();
        for _ in 0..2000 {
            let r = up.step().unwrap();
            if !up.at_sweep_boundary() {
                prop_assert!(r.eliminations.is_empty());
                continue;
            }
            let ms: Vec<u64> = up.survivors().iter().map(|&i| up.arms()[i].m()).collect();
            let (lo, hi) = (ms.iter().min().unwrap(), ms.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "unbalanced sweep: {:?}", ms);
            if up.survivors().len() == 1 {
                break;
            }
        }
    }
}
