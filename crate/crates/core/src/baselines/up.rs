use std::sync::Arc;

use crate::arm::ArmState;
use crate::bounds::BoundContext;
use crate::ledger::CostLedger;
use crate::oracle::RuntimeOracle;
use crate::oup::{OupOptions, RunOutcome, StopRule};
use crate::pool::Pool;
use crate::trace::{StepReport, TraceRecord};
use crate::utility::UtilityFunction;
use crate::{Error, Result};

/// Round-robin sampling with elimination at sweep boundaries.
///
/// Uses the same bounds, doubling rule and ε report as OUP; only the
/// selection and elimination policy differ.
pub struct UpRun {
    pool: Pool,
    ctx: BoundContext,
    sweep: Vec<usize>,
    cursor: usize,
}

impl UpRun {
    pub fn new(
        oracle: Arc<dyn RuntimeOracle>,
        configs: &[usize],
        u: UtilityFunction,
        opts: OupOptions,
    ) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::domain("configuration pool is empty"));
        }
        let ctx = match opts.context {
            Some(ctx) => ctx,
            None => BoundContext::single(configs.len(), opts.delta)?,
        };
        let mut pool = Pool::new(oracle, configs, u, opts.doubling);
        pool.reset_epsilon();
        Ok(UpRun { pool, ctx, sweep: Vec::new(), cursor: 0 })
    }

    pub fn arms(&self) -> &[ArmState] {
        &self.pool.arms
    }

    pub fn survivors(&self) -> &[usize] {
        &self.pool.survivors
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.pool.ledger
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.pool.trace
    }

    pub fn round(&self) -> u64 {
        self.pool.round
    }

    pub fn incumbent(&self) -> Result<usize> {
        self.pool.argmax_lcb()
    }

    pub fn guaranteed_epsilon(&self) -> Result<f64> {
        self.pool.epsilon_raw()
    }

    pub fn eps_min(&self) -> f64 {
        self.pool.eps_min
    }

    /// True between sweeps, where the survivors' sample counts are balanced.
    pub fn at_sweep_boundary(&self) -> bool {
        self.cursor == self.sweep.len()
    }

    pub fn step(&mut self) -> Result<StepReport> {
        if self.at_sweep_boundary() {
            self.sweep = self.pool.survivors.clone();
            self.cursor = 0;
        }
        let selected = self.sweep[self.cursor];
        let out = self.pool.pull(selected, &self.ctx)?;
        self.cursor += 1;
        let eliminations = if self.at_sweep_boundary() {
            let best = self.pool.argmax_lcb()?;
            let threshold = self.pool.arms[best].lcb();
            self.pool.eliminate_below(threshold)
        } else {
            Vec::new()
        };
        self.pool.record(selected, out, eliminations)
    }

    pub fn outcome(&self) -> Result<RunOutcome> {
        Ok(RunOutcome {
            incumbent: self.incumbent()?,
            certified_incumbent: self.pool.eps_min_incumbent,
            eps_raw: self.guaranteed_epsilon()?,
            eps_min: self.pool.eps_min,
            eps_min_round: self.pool.eps_min_round,
            rounds: self.pool.round,
            ledger_seconds: self.pool.ledger.total_seconds(),
        })
    }

    pub fn run_until(&mut self, stop: &StopRule) -> Result<RunOutcome> {
        stop.validate()?;
        while !stop.fires(
            self.pool.eps_min,
            self.pool.ledger.total_seconds(),
            self.pool.survivors.len(),
            self.pool.round,
        ) {
            self.step()?;
        }
        self.outcome()
    }
}
