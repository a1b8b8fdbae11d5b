//! Per-configuration bandit state and the pull mechanics shared by every
//! procedure.

use serde::Serialize;

use crate::bounds::{make_snapshot, snapshot_from_parts, BoundContext, BoundSnapshot, Captime, DoublingRule};
use crate::oracle::{CappedObservation, RuntimeOracle};
use crate::utility::UtilityFunction;
use crate::{Error, Result};

/// State of one arm: its samples, captime and current bounds.
///
/// `observations[j]` is the run on instance `j`, always taken (or refreshed)
/// at a captime no larger than the current one; capped entries sit exactly at
/// the current captime.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmState {
    config: usize,
    m: u64,
    captime: Captime,
    observations: Vec<CappedObservation>,
    snapshot: Option<BoundSnapshot>,
    eliminated: bool,
    #[serde(skip)]
    completed: u64,
    #[serde(skip)]
    utility_sum: f64,
}

/// Result of one pull.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PullOutcome {
    pub doubled: bool,
    pub runs: u64,
    pub time: f64,
}

impl ArmState {
    pub fn new(config: usize) -> Self {
        ArmState {
            config,
            m: 0,
            captime: Captime::INITIAL,
            observations: Vec::new(),
            snapshot: None,
            eliminated: false,
            completed: 0,
            utility_sum: 0.0,
        }
    }

    /// Oracle configuration id behind this arm.
    pub fn config(&self) -> usize {
        self.config
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn captime(&self) -> Captime {
        self.captime
    }

    pub fn observations(&self) -> &[CappedObservation] {
        &self.observations
    }

    pub fn snapshot(&self) -> Option<&BoundSnapshot> {
        self.snapshot.as_ref()
    }

    pub fn is_eliminated(&self) -> bool {
        self.eliminated
    }

    /// Upper bound; a fresh arm carries the sentinel 1.
    pub fn ucb(&self) -> f64 {
        self.snapshot.map_or(1.0, |s| s.ucb)
    }

    /// Lower bound; a fresh arm carries the sentinel 0.
    pub fn lcb(&self) -> f64 {
        self.snapshot.map_or(0.0, |s| s.lcb)
    }

    pub(crate) fn eliminate(&mut self) {
        self.eliminated = true;
    }

    /// One selection of this arm: `m += 1`, check the doubling condition with
    /// the new `m` and the previous F̂, rerun capped instances if the captime
    /// doubled, run instance `m`, then recompute the bounds.
    ///
    /// Nothing is committed if an oracle call fails.
    pub(crate) fn pull(
        &mut self,
        ctx: &BoundContext,
        u: &UtilityFunction,
        rule: DoublingRule,
        oracle: &dyn RuntimeOracle,
    ) -> Result<PullOutcome> {
        if self.eliminated {
            return Err(Error::Invariant(format!("pull of eliminated arm (config {})", self.config)));
        }
        let m = self.m + 1;
        let f_prev = self.snapshot.map_or(0.0, |s| s.f_hat);
        let alpha = ctx.alpha(m, self.captime)?;
        let doubled = rule.fires(alpha, u.at(self.captime.seconds()), f_prev);
        let captime = if doubled { self.captime.doubled() } else { self.captime };
        let kappa = captime.seconds();

        let mut time = 0.0;
        let mut reruns = Vec::new();
        if doubled {
            for (j, obs) in self.observations.iter().enumerate() {
                if !obs.completed {
                    let fresh = oracle.run(self.config, j, kappa)?;
                    time += fresh.duration;
                    reruns.push((j, fresh));
                }
            }
        }
        let newest = oracle.run(self.config, self.observations.len(), kappa)?;
        time += newest.duration;

        let runs = reruns.len() as u64 + 1;
        for (j, obs) in reruns {
            self.observations[j] = obs;
        }
        self.observations.push(newest);
        self.m = m;
        self.captime = captime;
        if doubled {
            self.resum(u);
        } else {
            self.completed += u64::from(newest.completed);
            self.utility_sum += u.at(newest.duration);
        }
        self.refresh(ctx, u)?;
        Ok(PullOutcome { doubled, runs, time })
    }

    // Left-to-right sums, so the running totals match a full recompute bit
    // for bit.
    fn resum(&mut self, u: &UtilityFunction) {
        self.completed = self.observations.iter().filter(|o| o.completed).count() as u64;
        self.utility_sum = 0.0;
        for o in &self.observations {
            self.utility_sum += u.at(o.duration);
        }
    }

    fn refresh(&mut self, ctx: &BoundContext, u: &UtilityFunction) -> Result<()> {
        let m = self.m as f64;
        let snapshot = snapshot_from_parts(
            self.m,
            self.captime,
            self.completed as f64 / m,
            self.utility_sum / m,
            ctx.alpha(self.m, self.captime)?,
            u.at(self.captime.seconds()),
        );
        if cfg!(debug_assertions) && (self.m <= 256 || self.m.is_power_of_two()) {
            let full = make_snapshot(ctx, self.m, self.captime, &self.observations, u)?;
            assert_eq!(snapshot, full, "running sums drifted from a full recompute");
        }
        self.snapshot = Some(snapshot);
        Ok(())
    }

    /// Recompute bounds under a new context without running anything.
    pub(crate) fn rebound(&mut self, ctx: &BoundContext, u: &UtilityFunction) -> Result<()> {
        if self.m > 0 {
            self.refresh(ctx, u)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::RuntimeMatrixDataset;

    fn dataset(rows: Vec<Vec<f64>>) -> RuntimeMatrixDataset {
        let names = (0..rows.len()).map(|i| format!("r{i}")).collect();
        RuntimeMatrixDataset::from_rows(names, rows, 0).unwrap()
    }

    #[test]
    fn fresh_arm_sentinels() {
        let arm = ArmState::new(3);
        assert_eq!((arm.ucb(), arm.lcb(), arm.m()), (1.0, 0.0, 0));
        assert_eq!(arm.captime(), Captime::INITIAL);
    }

    #[test]
    fn first_pull_never_doubles_under_old_rule() {
        let oracle = dataset(vec![vec![0.3; 4]]);
        let ctx = BoundContext::single(2, 0.5).unwrap();
        let u = UtilityFunction::default();
        let mut arm = ArmState::new(0);
        let out = arm.pull(&ctx, &u, DoublingRule::Old, &oracle).unwrap();
        assert!(!out.doubled);
        assert_eq!(out.runs, 1);
        assert_eq!(out.time, 0.3);
        assert_eq!(arm.m(), 1);
    }

    #[test]
    fn doubling_reruns_only_capped_instances() {
        // Every instance takes 1.5 s: capped at κ = 1, completed at κ = 2.
        let rows = vec![vec![1.5; 4]];
        let oracle = RuntimeMatrixDataset::from_rows(vec!["a".into()], rows, 0).unwrap();
        let ctx = BoundContext::single(1, 0.5).unwrap();
        // α > 1/2 for m ≤ 3, so the old rule cannot fire; with u(κ) ≈ 1 the
        // new rule always does.
        let u = UtilityFunction::uniform(1e6).unwrap();
        let mut arm = ArmState::new(0);
        for _ in 0..3 {
            let out = arm.pull(&ctx, &u, DoublingRule::Old, &oracle).unwrap();
            assert!(!out.doubled);
        }
        let capped_before = arm.observations().iter().filter(|o| !o.completed).count();
        assert_eq!(capped_before, 3);
        let out = arm.pull(&ctx, &u, DoublingRule::New, &oracle).unwrap();
        assert!(out.doubled);
        assert_eq!(out.runs, capped_before as u64 + 1);
        assert_eq!(arm.captime().seconds(), 2.0);
        assert_eq!(arm.m(), 4);
        assert_eq!(out.time, 6.0);
        for obs in arm.observations() {
            assert_eq!(*obs, CappedObservation { duration: 1.5, completed: true });
        }
        assert_eq!(arm.snapshot().unwrap().m, 4);
    }

    #[test]
    fn failed_pull_commits_nothing() {
        let oracle = dataset(vec![vec![0.1]]);
        let ctx = BoundContext::single(1, 0.1).unwrap();
        let u = UtilityFunction::default();
        let mut arm = ArmState::new(0);
        arm.pull(&ctx, &u, DoublingRule::Old, &oracle).unwrap();
        let before = arm.clone();
        assert!(matches!(
            arm.pull(&ctx, &u, DoublingRule::Old, &oracle),
            Err(Error::InstanceExhausted { .. })
        ));
        assert_eq!(arm, before);
    }
}
