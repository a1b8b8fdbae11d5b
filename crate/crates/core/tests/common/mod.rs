//! Shared fixtures for the integration tests: seeded synthetic pools and a
//! ground-truth evaluator that does not go through the library's own
//! quadrature.

#![allow(dead_code)]

use coup_core::oracle::RuntimeDist;
use coup_core::utility::UtilityFunction;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SIMPSON_PANELS: usize = 8192;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = SIMPSON_PANELS;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// `(U(κ), F(κ))`: expected utility of `min(T, κ)` and `Pr(T < κ)`.
/// `κ = ∞` gives the uncapped utility.
pub fn capped_truth(dist: &RuntimeDist, u: &UtilityFunction, kappa: f64) -> (f64, f64) {
    match *dist {
        RuntimeDist::TwoPoint { t1, t2, p } => {
            let part = |t: f64| if t < kappa { (u.at(t), 1.0) } else { (u.at(kappa), 0.0) };
            let (u1, f1) = part(t1);
            let (u2, f2) = part(t2);
            (p * u1 + (1.0 - p) * u2, p * f1 + (1.0 - p) * f2)
        }
        RuntimeDist::Exponential { mean } => {
            let lambda = 1.0 / mean;
            let density = |t: f64| lambda * (-lambda * t).exp();
            let k0 = u.kappa0();
            let body = simpson(|t| u.at(t) * density(t), 0.0, kappa.min(k0));
            // Beyond κ0, substitute t = κ0 / s so the tail lives on a bounded
            // interval.
            let tail = if kappa > k0 {
                let s_lo = if kappa.is_finite() { k0 / kappa } else { 0.0 };
                simpson(
                    |s| if s <= 0.0 { 0.0 } else { u.at(k0 / s) * density(k0 / s) * k0 / (s * s) },
                    s_lo,
                    1.0,
                )
            } else {
                0.0
            };
            let survive = if kappa.is_finite() { (-lambda * kappa).exp() } else { 0.0 };
            let at_cap = if kappa.is_finite() { u.at(kappa) * survive } else { 0.0 };
            (body + tail + at_cap, 1.0 - survive)
        }
        RuntimeDist::LogNormal { .. } => unimplemented!("fixtures use exponential and two-point arms"),
    }
}

pub fn true_utility(dist: &RuntimeDist, u: &UtilityFunction) -> f64 {
    capped_truth(dist, u, f64::INFINITY).0
}

/// Ten arms, five exponential and five two-point, with parameters drawn
/// from `seed`. Some two-point arms never finish their slow branch.
pub fn mixed_pool(seed: u64) -> Vec<RuntimeDist> {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut pool = Vec::with_capacity(10);
    for _ in 0..5 {
        let mean = 10f64.powf(rng.random_range(-0.5..2.3));
        pool.push(RuntimeDist::Exponential { mean });
    }
    for _ in 0..5 {
        let t1 = 10f64.powf(rng.random_range(-1.0..1.5));
        let t2 = if rng.random_bool(0.4) { f64::INFINITY } else { 10f64.powf(rng.random_range(1.5..3.0)) };
        let p = rng.random_range(0.3..0.95);
        pool.push(RuntimeDist::TwoPoint { t1, t2, p });
    }
    pool
}

/// Ten arms whose runtimes sit at the scale of κ0 = 60: exponential means
/// between 3 s and 300 s and two-point arms whose fast branch takes 2 to
/// 60 s. No arm finishes most runs inside the initial 1 s captime.
pub fn benchmark_pool(seed: u64) -> Vec<RuntimeDist> {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    let mut pool = Vec::with_capacity(10);
    for _ in 0..5 {
        let mean = 10f64.powf(rng.random_range(0.5..2.5));
        pool.push(RuntimeDist::Exponential { mean });
    }
    for _ in 0..5 {
        let t1 = 10f64.powf(rng.random_range(0.3..1.8));
        let t2 = if rng.random_bool(0.4) { f64::INFINITY } else { 10f64.powf(rng.random_range(2.0..3.3)) };
        let p = rng.random_range(0.3..0.95);
        pool.push(RuntimeDist::TwoPoint { t1, t2, p });
    }
    pool
}

/// Twenty arms: ten fast exponential arms and ten arms whose utility sits
/// at least 0.3 below the best under LogLaplace(60, 1).
pub fn gapped_pool() -> Vec<RuntimeDist> {
    let mut pool: Vec<RuntimeDist> = [0.5, 0.8, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0]
        .into_iter()
        .map(|mean| RuntimeDist::Exponential { mean })
        .collect();
    pool.extend([
        RuntimeDist::Exponential { mean: 60.0 },
        RuntimeDist::Exponential { mean: 90.0 },
        RuntimeDist::Exponential { mean: 150.0 },
        RuntimeDist::Exponential { mean: 400.0 },
        RuntimeDist::TwoPoint { t1: 1.0, t2: f64::INFINITY, p: 0.6 },
        RuntimeDist::TwoPoint { t1: 0.5, t2: 1000.0, p: 0.5 },
        RuntimeDist::TwoPoint { t1: 2.0, t2: f64::INFINITY, p: 0.4 },
        RuntimeDist::TwoPoint { t1: 30.0, t2: 300.0, p: 0.5 },
        RuntimeDist::TwoPoint { t1: 100.0, t2: 100.0, p: 1.0 },
        RuntimeDist::TwoPoint { t1: 0.1, t2: f64::INFINITY, p: 0.2 },
    ]);
    pool
}

/// `(max true utility, true utility of each arm)`.
pub fn utilities(pool: &[RuntimeDist], u: &UtilityFunction) -> (f64, Vec<f64>) {
    let us: Vec<f64> = pool.iter().map(|d| true_utility(d, u)).collect();
    let best = us.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (best, us)
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
