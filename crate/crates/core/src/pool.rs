//! Arm store, ledger and trace bookkeeping shared by the bandit procedures.

use std::sync::Arc;

use crate::arm::{ArmState, PullOutcome};
use crate::bounds::{BoundContext, DoublingRule};
use crate::ledger::CostLedger;
use crate::oracle::RuntimeOracle;
use crate::trace::{StepReport, TraceRecord};
use crate::utility::UtilityFunction;
use crate::{Error, Result};

pub(crate) struct Pool {
    pub arms: Vec<ArmState>,
    /// Surviving arm indices, ascending.
    pub survivors: Vec<usize>,
    pub ledger: CostLedger,
    pub trace: Vec<TraceRecord>,
    pub round: u64,
    pub eps_min: f64,
    pub eps_min_round: u64,
    pub eps_min_incumbent: usize,
    pub u: UtilityFunction,
    pub rule: DoublingRule,
    pub oracle: Arc<dyn RuntimeOracle>,
}

impl Pool {
    pub fn new(
        oracle: Arc<dyn RuntimeOracle>,
        configs: &[usize],
        u: UtilityFunction,
        rule: DoublingRule,
    ) -> Self {
        let mut pool = Pool {
            arms: Vec::new(),
            survivors: Vec::new(),
            ledger: CostLedger::new(),
            trace: Vec::new(),
            round: 0,
            eps_min: 1.0,
            eps_min_round: 0,
            eps_min_incumbent: 0,
            u,
            rule,
            oracle,
        };
        for &c in configs {
            pool.add_arm(c);
        }
        pool
    }

    pub fn add_arm(&mut self, config: usize) -> usize {
        let idx = self.arms.len();
        self.arms.push(ArmState::new(config));
        self.survivors.push(idx);
        idx
    }

    fn argmax_by(&self, key: impl Fn(&ArmState) -> f64) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &i in &self.survivors {
            let v = key(&self.arms[i]);
            // Survivors are ascending, so strict `>` keeps the lowest index on ties.
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
            .ok_or_else(|| Error::Invariant("empty survivor set".into()))
    }

    pub fn argmax_ucb(&self) -> Result<usize> {
        self.argmax_by(ArmState::ucb)
    }

    pub fn argmax_lcb(&self) -> Result<usize> {
        self.argmax_by(ArmState::lcb)
    }

    /// `max_I UCB − max_I LCB`, unclamped.
    pub fn gap(&self) -> Result<f64> {
        let hi = self.arms[self.argmax_ucb()?].ucb();
        let lo = self.arms[self.argmax_lcb()?].lcb();
        Ok(hi - lo)
    }

    pub fn epsilon_raw(&self) -> Result<f64> {
        Ok(self.gap()?.clamp(0.0, 1.0))
    }

    pub fn pull(&mut self, arm: usize, ctx: &BoundContext) -> Result<PullOutcome> {
        let out = self.arms[arm]
            .pull(ctx, &self.u, self.rule, self.oracle.as_ref())
            .map_err(|e| e.with_epsilon(self.eps_min))?;
        self.ledger.charge(arm, out.time, out.runs);
        Ok(out)
    }

    /// Eliminates every survivor whose UCB is below `threshold`.
    pub fn eliminate_below(&mut self, threshold: f64) -> Vec<usize> {
        let mut gone = Vec::new();
        let arms = &mut self.arms;
        self.survivors.retain(|&i| {
            if arms[i].ucb() < threshold {
                arms[i].eliminate();
                gone.push(i);
                false
            } else {
                true
            }
        });
        gone
    }

    pub fn reset_epsilon(&mut self) {
        self.eps_min = 1.0;
        self.eps_min_round = self.round;
        self.eps_min_incumbent = self.argmax_lcb().unwrap_or(0);
    }

    /// Closes a round: bumps the counter, updates ε and appends a trace row.
    pub fn record(&mut self, selected: usize, out: PullOutcome, eliminations: Vec<usize>) -> Result<StepReport> {
        self.round += 1;
        let eps_raw = self.epsilon_raw()?;
        let incumbent = self.argmax_lcb()?;
        if eps_raw < self.eps_min {
            self.eps_min = eps_raw;
            self.eps_min_round = self.round;
            self.eps_min_incumbent = incumbent;
        }
        self.trace.push(TraceRecord {
            round: self.round,
            ledger_seconds: self.ledger.total_seconds(),
            selected,
            doubled: out.doubled,
            eps_raw,
            eps_min: self.eps_min,
            survivors: self.survivors.len(),
            incumbent,
        });
        Ok(StepReport {
            selected,
            doubled: out.doubled,
            runs_executed: out.runs,
            time_spent: out.time,
            eliminations,
        })
    }
}
