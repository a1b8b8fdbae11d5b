//! OUP: optimistic UCB selection over a finite configuration pool with
//! captime doubling, elimination and an anytime ε certificate.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arm::ArmState;
use crate::bounds::{BoundContext, DoublingRule};
use crate::ledger::CostLedger;
use crate::oracle::RuntimeOracle;
use crate::pool::Pool;
use crate::trace::{StepReport, TraceRecord};
use crate::utility::UtilityFunction;
use crate::{Error, Result};

/// When a sequential procedure stops. Every rule is checked before a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StopRule {
    /// Running-minimum ε at or below the target.
    TargetEpsilon(f64),
    /// Ledger time at or above the budget.
    BudgetSeconds(f64),
    SingleSurvivor,
    MaxRounds(u64),
    /// Stops as soon as any member fires.
    Any(Vec<StopRule>),
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            StopRule::TargetEpsilon(e) if !(*e >= 0.0) => {
                Err(Error::spec("stop", format!("target epsilon must be >= 0, got {e}")))
            }
            StopRule::BudgetSeconds(b) if !(*b >= 0.0) => {
                Err(Error::spec("stop", format!("budget must be >= 0, got {b}")))
            }
            StopRule::Any(rules) if rules.is_empty() => Err(Error::spec("stop", "empty rule list")),
            StopRule::Any(rules) => rules.iter().try_for_each(StopRule::validate),
            _ => Ok(()),
        }
    }

    pub(crate) fn fires(&self, eps_min: f64, ledger: f64, survivors: usize, round: u64) -> bool {
        match self {
            StopRule::TargetEpsilon(e) => eps_min <= *e,
            StopRule::BudgetSeconds(b) => ledger >= *b,
            StopRule::SingleSurvivor => survivors <= 1,
            StopRule::MaxRounds(r) => round >= *r,
            StopRule::Any(rules) => rules.iter().any(|r| r.fires(eps_min, ledger, survivors, round)),
        }
    }

    /// The target ε, if this rule (or one of its members) sets one.
    pub fn target_epsilon(&self) -> Option<f64> {
        match self {
            StopRule::TargetEpsilon(e) => Some(*e),
            StopRule::Any(rules) => rules.iter().find_map(StopRule::target_epsilon),
            _ => None,
        }
    }
}

impl fmt::Display for StopRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopRule::TargetEpsilon(e) => write!(f, "epsilon:{e}"),
            StopRule::BudgetSeconds(b) => write!(f, "budget:{b}"),
            StopRule::SingleSurvivor => write!(f, "survivor"),
            StopRule::MaxRounds(r) => write!(f, "rounds:{r}"),
            StopRule::Any(rules) => {
                for (i, r) in rules.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{r}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `epsilon:0.2`, `budget:1000`, `survivor`, `rounds:500`, or a
/// comma-separated list of these.
impl FromStr for StopRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        if parts.len() > 1 {
            let rules = parts.iter().map(|p| p.parse()).collect::<Result<Vec<_>>>()?;
            return Ok(StopRule::Any(rules));
        }
        let part = parts.first().copied().unwrap_or("");
        let (key, value) = part.split_once(':').unwrap_or((part, ""));
        let num = |v: &str| -> Result<f64> {
            v.parse().map_err(|_| Error::spec("stop", format!("bad number `{v}` in `{part}`")))
        };
        let rule = match key {
            "epsilon" | "eps" => StopRule::TargetEpsilon(num(value)?),
            "budget" => StopRule::BudgetSeconds(num(value)?),
            "survivor" | "single_survivor" => StopRule::SingleSurvivor,
            "rounds" => StopRule::MaxRounds(
                value
                    .parse()
                    .map_err(|_| Error::spec("stop", format!("bad round count `{value}`")))?,
            ),
            _ => return Err(Error::spec("stop", format!("unknown stop rule `{part}`"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

string_serde!(StopRule);

/// Final state of a sequential run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// `argmax LCB` over the survivors when the run stopped.
    pub incumbent: usize,
    /// Incumbent at the round where `eps_min` was reached.
    pub certified_incumbent: usize,
    pub eps_raw: f64,
    pub eps_min: f64,
    pub eps_min_round: u64,
    pub rounds: u64,
    pub ledger_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OupOptions {
    pub delta: f64,
    pub doubling: DoublingRule,
    pub eliminate: bool,
    /// Overrides the bound context; `None` uses `(n = pool size, δ)`.
    pub context: Option<BoundContext>,
}

impl Default for OupOptions {
    fn default() -> Self {
        OupOptions { delta: 0.01, doubling: DoublingRule::Old, eliminate: true, context: None }
    }
}

impl OupOptions {
    pub fn with_delta(delta: f64) -> Self {
        OupOptions { delta, ..Self::default() }
    }
}

/// One OUP execution. Arm `k` of the pool runs oracle configuration
/// `configs[k]`.
pub struct OupRun {
    pub(crate) pool: Pool,
    ctx: BoundContext,
    eliminate: bool,
}

impl OupRun {
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
        Ok(OupRun { pool, ctx, eliminate: opts.eliminate })
    }

    /// Pool of every configuration the oracle offers.
    pub fn over_all(oracle: Arc<dyn RuntimeOracle>, u: UtilityFunction, opts: OupOptions) -> Result<Self> {
        let n = oracle
            .num_configs()
            .ok_or_else(|| Error::domain("oracle has an unbounded configuration population"))?;
        let configs: Vec<usize> = (0..n).collect();
        Self::new(oracle, &configs, u, opts)
    }

    pub fn context(&self) -> &BoundContext {
        &self.ctx
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

    pub fn utility(&self) -> &UtilityFunction {
        &self.pool.u
    }

    pub fn oracle(&self) -> &Arc<dyn RuntimeOracle> {
        &self.pool.oracle
    }

    /// Surviving arm with the largest UCB, lowest index on ties.
    pub fn select_arm(&self) -> Result<usize> {
        self.pool.argmax_ucb()
    }

    /// Surviving arm with the largest LCB, lowest index on ties.
    pub fn incumbent(&self) -> Result<usize> {
        self.pool.argmax_lcb()
    }

    /// Instantaneous `max_I UCB − LCB_{i*}`, clamped to `[0, 1]`.
    pub fn guaranteed_epsilon(&self) -> Result<f64> {
        self.pool.epsilon_raw()
    }

    /// Smallest ε certified so far.
    pub fn eps_min(&self) -> f64 {
        self.pool.eps_min
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let selected = self.select_arm()?;
        let out = self.pool.pull(selected, &self.ctx)?;
        let eliminations = if self.eliminate {
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

    /// Steps until `stop` fires. On an oracle error the trace so far stays
    /// readable through [`OupRun::trace`].
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
