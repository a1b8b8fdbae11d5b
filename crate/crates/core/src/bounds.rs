//! Confidence widths, utility bounds and captime-doubling conditions.
//!
//! Bounds are always recomputed from the stored observations; nothing is
//! updated incrementally. UCB and LCB are deliberately left unclamped so that
//! the width identity
//!
//! ```text
//! UCB - LCB = (2 - u(κ))·α + u(κ)·(1 - F̂)
//! ```
//!
//! holds exactly up to rounding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::oracle::CappedObservation;
use crate::utility::UtilityFunction;
use crate::{Error, Result};

/// A captime on the doubling grid `κ = 2^(l-1)` seconds, `l ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Captime {
    doublings: u32,
}

impl Captime {
    /// The initial captime of one second.
    pub const INITIAL: Captime = Captime { doublings: 0 };

    pub fn from_seconds(seconds: f64) -> Result<Self> {
        let l = seconds.log2();
        if seconds >= 1.0 && l.fract() == 0.0 && l < 1023.0 {
            Ok(Captime { doublings: l as u32 })
        } else {
            Err(Error::domain(format!("captime must be a power of two >= 1, got {seconds}")))
        }
    }

    pub fn seconds(self) -> f64 {
        2f64.powi(self.doublings as i32)
    }

    pub fn doubled(self) -> Self {
        Captime { doublings: self.doublings + 1 }
    }

    /// `log₂ κ + 1`, the index of κ on the doubling grid.
    pub fn grid_index(self) -> u32 {
        self.doublings + 1
    }
}

/// Parameters of the confidence width: pool size, failure probability and,
/// for phased runs, the phase index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundContext {
    n: usize,
    delta: f64,
    phase: Option<u32>,
}

impl BoundContext {
    /// Single-pool context: `α = sqrt(ln(11 n m² l² / δ) / 2m)`.
    pub fn single(n: usize, delta: f64) -> Result<Self> {
        Self::new(n, delta, None)
    }

    /// Phase context: `α_p = sqrt(ln(36 p² n_p m² l² / δ) / 2m)`.
    pub fn phased(phase: u32, n_p: usize, delta: f64) -> Result<Self> {
        if phase == 0 {
            return Err(Error::domain("phase index starts at 1"));
        }
        Self::new(n_p, delta, Some(phase))
    }

    fn new(n: usize, delta: f64, phase: Option<u32>) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("a bound context needs n >= 1"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(BoundContext { n, delta, phase })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn phase(&self) -> Option<u32> {
        self.phase
    }

    /// Confidence width for `m ≥ 1` samples taken at captime `κ`.
    pub fn alpha(&self, m: u64, captime: Captime) -> Result<f64> {
        if m == 0 {
            return Err(Error::domain("alpha is undefined before the first sample"));
        }
        let m = m as f64;
        let l = f64::from(captime.grid_index());
        let union = match self.phase {
            None => 11.0 * self.n as f64,
            Some(p) => {
                let p = f64::from(p);
                36.0 * p * p * self.n as f64
            }
        };
        let log_term = union.ln() + 2.0 * m.ln() + 2.0 * l.ln() - self.delta.ln();
        Ok((log_term / (2.0 * m)).sqrt())
    }
}

/// Fraction of runs that completed under the current captime.
pub fn empirical_cdf_at_cap(obs: &[CappedObservation]) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::domain("empirical CDF of an empty sample"));
    }
    Ok(obs.iter().filter(|o| o.completed).count() as f64 / obs.len() as f64)
}

/// Mean utility of the capped durations.
pub fn empirical_utility(obs: &[CappedObservation], u: &UtilityFunction) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::domain("empirical utility of an empty sample"));
    }
    let mut total = 0.0;
    for o in obs {
        total += u.eval(o.duration)?;
    }
    Ok(total / obs.len() as f64)
}

/// Original doubling rule: double when `2α ≤ u(κ)(1 − F̂)`.
pub fn doubling_old(alpha: f64, u_kappa: f64, f_hat: f64) -> bool {
    2.0 * alpha <= u_kappa * (1.0 - f_hat)
}

/// Balanced doubling rule: double when `2(1 − u(κ))α ≤ u(κ)(1 − F̂ + α)`.
pub fn doubling_new(alpha: f64, u_kappa: f64, f_hat: f64) -> bool {
    2.0 * (1.0 - u_kappa) * alpha <= u_kappa * (1.0 - f_hat + alpha)
}

/// Which captime-doubling condition a run uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoublingRule {
    #[default]
    Old,
    New,
}

impl DoublingRule {
    pub fn fires(self, alpha: f64, u_kappa: f64, f_hat: f64) -> bool {
        match self {
            DoublingRule::Old => doubling_old(alpha, u_kappa, f_hat),
            DoublingRule::New => doubling_new(alpha, u_kappa, f_hat),
        }
    }
}

impl fmt::Display for DoublingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DoublingRule::Old => "old",
            DoublingRule::New => "new",
        })
    }
}

impl FromStr for DoublingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "old" => Ok(DoublingRule::Old),
            "new" => Ok(DoublingRule::New),
            other => Err(Error::spec("doubling", format!("expected `old` or `new`, got `{other}`"))),
        }
    }
}

/// Bounds of one arm after `m` samples at captime `κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSnapshot {
    pub m: u64,
    pub captime: Captime,
    pub f_hat: f64,
    pub u_hat: f64,
    pub alpha: f64,
    pub u_kappa: f64,
    pub ucb: f64,
    pub lcb: f64,
}

impl BoundSnapshot {
    pub fn width(&self) -> f64 {
        self.ucb - self.lcb
    }

    /// Right-hand side of the width identity.
    pub fn width_identity(&self) -> f64 {
        (2.0 - self.u_kappa) * self.alpha + self.u_kappa * (1.0 - self.f_hat)
    }
}

/// Recomputes F̂, Û, UCB and LCB from `obs`, which must hold exactly `m`
/// observations taken at `captime`.
pub fn make_snapshot(
    ctx: &BoundContext,
    m: u64,
    captime: Captime,
    obs: &[CappedObservation],
    u: &UtilityFunction,
) -> Result<BoundSnapshot> {
    if obs.len() as u64 != m {
        return Err(Error::Invariant(format!("{} observations for m = {m}", obs.len())));
    }
    let f_hat = empirical_cdf_at_cap(obs)?;
    let u_hat = empirical_utility(obs, u)?;
    let alpha = ctx.alpha(m, captime)?;
    Ok(snapshot_from_parts(m, captime, f_hat, u_hat, alpha, u.eval(captime.seconds())?))
}

pub(crate) fn snapshot_from_parts(
    m: u64,
    captime: Captime,
    f_hat: f64,
    u_hat: f64,
    alpha: f64,
    u_kappa: f64,
) -> BoundSnapshot {
    BoundSnapshot {
        m,
        captime,
        f_hat,
        u_hat,
        alpha,
        u_kappa,
        ucb: u_hat + (1.0 - u_kappa) * alpha,
        lcb: u_hat - alpha - u_kappa * (1.0 - f_hat),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx10() -> BoundContext {
        BoundContext::single(10, 0.1).unwrap()
    }

    fn obs(d: f64, c: bool) -> CappedObservation {
        CappedObservation { duration: d, completed: c }
    }

    #[test]
    fn alpha_values() {
        // sqrt(ln(11·10·100²/0.1)/200), evaluated to 50 digits.
        let a1 = ctx10().alpha(100, Captime::INITIAL).unwrap();
        assert!((a1 - 0.284_722_723_283_220_3).abs() < 1e-14, "{a1}");
        // κ = 2 doubles (log₂κ + 1).
        let a2 = ctx10().alpha(100, Captime::from_seconds(2.0).unwrap()).unwrap();
        assert!((a2 - 0.296_645_412_840_671_9).abs() < 1e-14, "{a2}");
    }

    #[test]
    fn alpha_at_zero_samples_is_an_error() {
        assert!(matches!(ctx10().alpha(0, Captime::INITIAL), Err(Error::Domain(_))));
    }

    #[test]
    fn alpha_first_sample_exceeds_one() {
        let ctx = BoundContext::single(2, 0.5).unwrap();
        let a = ctx.alpha(1, Captime::INITIAL).unwrap();
        assert!((a - (44f64.ln() / 2.0).sqrt()).abs() < 1e-15);
        assert!(a > 1.0);
    }

    #[test]
    fn phased_alpha_formula() {
        let ctx = BoundContext::phased(3, 20, 0.05).unwrap();
        let kappa = Captime::from_seconds(8.0).unwrap();
        let expected = ((36.0 * 9.0 * 20.0 * 49.0 * 16.0 / 0.05f64).ln() / 14.0).sqrt();
        assert!((ctx.alpha(7, kappa).unwrap() - expected).abs() < 1e-14);
        // Later phases are wider at equal (m, κ).
        let next = BoundContext::phased(4, 20, 0.05).unwrap();
        assert!(next.alpha(7, kappa).unwrap() > ctx.alpha(7, kappa).unwrap());
    }

    #[test]
    fn alpha_monotonicity() {
        let c = ctx10();
        let k = Captime::INITIAL;
        assert!(c.alpha(400, k).unwrap() < c.alpha(100, k).unwrap());
        assert!(c.alpha(100, k.doubled()).unwrap() >= c.alpha(100, k).unwrap());
        let tighter = BoundContext::single(10, 0.01).unwrap();
        assert!(tighter.alpha(100, k).unwrap() > c.alpha(100, k).unwrap());
    }

    #[test]
    fn captime_grid() {
        assert_eq!(Captime::INITIAL.seconds(), 1.0);
        assert_eq!(Captime::INITIAL.grid_index(), 1);
        let k = Captime::from_seconds(64.0).unwrap();
        assert_eq!(k.grid_index(), 7);
        assert_eq!(k.doubled().seconds(), 128.0);
        assert!(Captime::from_seconds(3.0).is_err());
        assert!(Captime::from_seconds(0.5).is_err());
    }

    #[test]
    fn bad_contexts() {
        assert!(BoundContext::single(0, 0.1).is_err());
        assert!(BoundContext::single(3, 0.0).is_err());
        assert!(BoundContext::single(3, 1.0).is_err());
        assert!(BoundContext::phased(0, 3, 0.1).is_err());
    }

    #[test]
    fn empirical_cdf() {
        let sample = [obs(0.5, true), obs(1.0, false), obs(1.0, false)];
        assert!((empirical_cdf_at_cap(&sample).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_cdf_at_cap(&[obs(0.1, true), obs(0.2, true)]).unwrap(), 1.0);
        assert_eq!(empirical_cdf_at_cap(&[obs(1.0, false)]).unwrap(), 0.0);
        assert!(empirical_cdf_at_cap(&[]).is_err());
    }

    #[test]
    fn empirical_utility_values() {
        let u = UtilityFunction::uniform(60.0).unwrap();
        let sample = [obs(0.5, true), obs(1.0, false), obs(1.0, false)];
        let expected = (0.991_666_666_666_666_7 + 2.0 * 0.983_333_333_333_333_3) / 3.0;
        assert!((empirical_utility(&sample, &u).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.986_111).abs() < 1e-6);
        assert_eq!(empirical_utility(&[obs(0.0, true)], &u).unwrap(), 1.0);
        let ll = UtilityFunction::log_laplace(60.0, 1.0).unwrap();
        assert_eq!(empirical_utility(&[obs(60.0, false)], &ll).unwrap(), 0.5);
        assert!(empirical_utility(&[], &u).is_err());
    }

    #[test]
    fn old_rule() {
        assert!(doubling_old(0.1, 0.5, 0.2));
        assert!(!doubling_old(1e-9, 0.0, 0.2));
        assert!(!doubling_old(1e-9, 0.7, 1.0));
    }

    #[test]
    fn new_rule() {
        assert!(doubling_new(0.1, 0.5, 0.2));
        assert!(doubling_new(5.0, 1.0, 1.0));
        assert!(!doubling_new(1e-9, 0.0, 0.3));
    }

    #[test]
    fn new_rule_limits() {
        // All runs complete and α → 0: left side stays positive, right side vanishes.
        assert!(!doubling_new(1e-12, 0.6, 1.0));
        // Nothing completes: true exactly when u ≥ 2(1 − u)α / (1 + α).
        for (alpha, u) in [(0.3, 0.4), (0.05, 0.1), (2.0, 0.7)] {
            let threshold = 2.0 * (1.0 - u) * alpha / (1.0 + alpha);
            assert_eq!(doubling_new(alpha, u, 0.0), u >= threshold);
        }
    }

    #[test]
    fn snapshot_single_completed_run() {
        let ctx = ctx10();
        let u = UtilityFunction::log_laplace(1.0, 1.0).unwrap();
        // κ = 1 = κ0, so u(κ) = 1/2; a zero-second run has utility 1.
        let snap = make_snapshot(&ctx, 1, Captime::INITIAL, &[obs(0.0, true)], &u).unwrap();
        let alpha = ctx.alpha(1, Captime::INITIAL).unwrap();
        assert_eq!(snap.u_hat, 1.0);
        assert_eq!(snap.f_hat, 1.0);
        assert!((snap.ucb - (1.0 + 0.5 * alpha)).abs() < 1e-15);
        assert!((snap.lcb - (1.0 - alpha)).abs() < 1e-15);
    }

    #[test]
    fn snapshot_all_capped_is_not_clamped() {
        let ctx = ctx10();
        let u = UtilityFunction::default();
        let kappa = Captime::from_seconds(4.0).unwrap();
        let sample = vec![obs(4.0, false); 5];
        let snap = make_snapshot(&ctx, 5, kappa, &sample, &u).unwrap();
        assert_eq!(snap.f_hat, 0.0);
        assert!((snap.u_hat - u.at(4.0)).abs() < 1e-15);
        assert!((snap.lcb + snap.alpha).abs() < 1e-15);
    }

    #[test]
    fn snapshot_rejects_wrong_count() {
        let u = UtilityFunction::default();
        assert!(make_snapshot(&ctx10(), 2, Captime::INITIAL, &[obs(0.1, true)], &u).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn width_identity(
            n in 1usize..500,
            delta in 0.001f64..0.5,
            m in 1u64..100_000,
            doublings in 0u32..30,
            f_hat in 0.0f64..=1.0,
            u_hat in 0.0f64..=1.0,
            u_kappa in 0.0f64..=1.0,
        ) {
            let captime = Captime { doublings };
            let alpha = BoundContext::single(n, delta).unwrap().alpha(m, captime).unwrap();
            let snap = snapshot_from_parts(m, captime, f_hat, u_hat, alpha, u_kappa);
            let rel = (snap.width() - snap.width_identity()).abs() / snap.width_identity();
            prop_assert!(rel <= 1e-12, "relative error {}", rel);
            prop_assert!(snap.lcb <= snap.ucb);
        }
    }
}
