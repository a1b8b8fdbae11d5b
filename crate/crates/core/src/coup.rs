//! COUP: phased search over a sampled, growing configuration pool.
//!
//! Phase `p` grows the pool to `n_p` arms, refreshes every existing arm's
//! bounds under the phase context, then pulls the max-UCB arm until
//! `max UCB − max LCB < ε_p`. Arms are never eliminated, and observations
//! carry over between phases.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arm::ArmState;
use crate::bounds::{BoundContext, DoublingRule};
use crate::ledger::CostLedger;
use crate::oracle::{GroundTruth, RuntimeOracle};
use crate::pool::Pool;
use crate::rng::{self, DOMAIN_CONFIG_SAMPLE};
use crate::trace::{StepReport, TraceRecord};
use crate::utility::UtilityFunction;
use crate::{Error, Result};

/// `exp(−p^power / scale)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpDecay {
    pub power: f64,
    pub scale: f64,
}

impl ExpDecay {
    pub const fn new(power: f64, scale: f64) -> Self {
        ExpDecay { power, scale }
    }

    pub fn at(&self, p: u32) -> f64 {
        (-(p as f64).powf(self.power) / self.scale).exp()
    }
}

impl fmt::Display for ExpDecay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e^-p")?;
        if self.power != 1.0 {
            write!(f, "^{}", self.power)?;
        }
        if self.scale != 1.0 {
            write!(f, "/{}", self.scale)?;
        }
        Ok(())
    }
}

/// Parses `e^-p`, `e^-p/6`, `e^-p^3/300`.
impl FromStr for ExpDecay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::spec("schedule", format!("expected e^-p[^K][/C], got `{s}`"));
        let rest = s.trim().strip_prefix("e^-p").ok_or_else(bad)?;
        let (power_part, scale_part) = match rest.split_once('/') {
            Some((a, b)) => (a, Some(b)),
            None => (rest, None),
        };
        let power = match power_part.strip_prefix('^') {
            Some(k) => k.parse().map_err(|_| bad())?,
            None if power_part.is_empty() => 1.0,
            None => return Err(bad()),
        };
        let scale = match scale_part {
            Some(c) => c.parse().map_err(|_| bad())?,
            None => 1.0,
        };
        let decay = ExpDecay { power, scale };
        if !(power.is_finite() && power > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(Error::spec("schedule", format!("power and scale must be positive in `{s}`")));
        }
        Ok(decay)
    }
}

/// Generator of the per-phase `(ε_p, γ_p)` targets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Schedule {
    #[default]
    Default,
    GammaFocus,
    EpsilonFocus,
    Balanced,
    GammaThenEpsilon,
    Custom { eps: ExpDecay, gamma: ExpDecay },
    /// Explicit values for phases `1..=len`.
    Explicit { eps: Vec<f64>, gamma: Vec<f64> },
}

impl Schedule {
    fn decays(&self) -> Option<(ExpDecay, ExpDecay)> {
        let d = ExpDecay::new;
        Some(match self {
            Schedule::Default => (d(1.0, 6.0), d(1.0, 3.0)),
            Schedule::GammaFocus => (d(1.0, 30.0), d(1.0, 3.0)),
            Schedule::EpsilonFocus => (d(1.0, 3.0), d(1.0, 30.0)),
            Schedule::Balanced => (d(1.0, 5.0), d(1.0, 5.0)),
            Schedule::GammaThenEpsilon => (d(3.0, 300.0), d(2.0, 30.0)),
            Schedule::Custom { eps, gamma } => (*eps, *gamma),
            Schedule::Explicit { .. } => return None,
        })
    }

    /// `(ε_p, γ_p)` for phase `p ≥ 1`.
    pub fn at(&self, p: u32) -> Result<(f64, f64)> {
        if p == 0 {
            return Err(Error::domain("phases are numbered from 1"));
        }
        let (eps, gamma) = match (self, self.decays()) {
            (_, Some((e, g))) => (e.at(p), g.at(p)),
            (Schedule::Explicit { eps, gamma }, None) => {
                let i = p as usize - 1;
                match (eps.get(i), gamma.get(i)) {
                    (Some(&e), Some(&g)) => (e, g),
                    _ => {
                        return Err(Error::spec(
                            "schedule",
                            format!("explicit schedule has no entry for phase {p}"),
                        ))
                    }
                }
            }
            _ => unreachable!(),
        };
        if !(eps > 0.0 && eps < 1.0 && gamma > 0.0 && gamma < 1.0) {
            return Err(Error::spec(
                "schedule",
                format!("phase {p} gives eps={eps}, gamma={gamma}; both must lie in (0, 1)"),
            ));
        }
        Ok((eps, gamma))
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        match self {
            Schedule::Default => write!(f, "default"),
            Schedule::GammaFocus => write!(f, "gamma_focus"),
            Schedule::EpsilonFocus => write!(f, "epsilon_focus"),
            Schedule::Balanced => write!(f, "balanced"),
            Schedule::GammaThenEpsilon => write!(f, "gamma_then_epsilon"),
            Schedule::Custom { eps, gamma } => write!(f, "custom:eps={eps},gamma={gamma}"),
            Schedule::Explicit { eps, gamma } => write!(f, "seq:eps={},gamma={}", join(eps), join(gamma)),
        }
    }
}

/// Parses a preset name, `custom:eps=e^-p/6,gamma=e^-p/3`, or
/// `seq:eps=0.5;0.4,gamma=0.3;0.2`.
impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let preset = match s {
            "default" => Some(Schedule::Default),
            "gamma_focus" => Some(Schedule::GammaFocus),
            "epsilon_focus" => Some(Schedule::EpsilonFocus),
            "balanced" => Some(Schedule::Balanced),
            "gamma_then_epsilon" => Some(Schedule::GammaThenEpsilon),
            _ => None,
        };
        if let Some(p) = preset {
            return Ok(p);
        }
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| Error::spec("schedule", format!("unknown schedule `{s}`")))?;
        let mut eps = None;
        let mut gamma = None;
        for part in body.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::spec("schedule", format!("expected key=value, got `{part}`")))?;
            match k.trim() {
                "eps" | "epsilon" => eps = Some(v.trim()),
                "gamma" => gamma = Some(v.trim()),
                other => return Err(Error::spec("schedule", format!("unknown key `{other}`"))),
            }
        }
        let (eps, gamma) = match (eps, gamma) {
            (Some(e), Some(g)) => (e, g),
            _ => return Err(Error::spec("schedule", "both eps and gamma are required")),
        };
        match kind {
            "custom" => Ok(Schedule::Custom { eps: eps.parse()?, gamma: gamma.parse()? }),
            "seq" => {
                let list = |v: &str| -> Result<Vec<f64>> {
                    v.split(';')
                        .map(|x| {
                            x.trim()
                                .parse::<f64>()
                                .map_err(|_| Error::spec("schedule", format!("bad number `{x}`")))
                        })
                        .collect()
                };
                let (eps, gamma) = (list(eps)?, list(gamma)?);
                if eps.is_empty() || eps.len() != gamma.len() {
                    return Err(Error::spec("schedule", "eps and gamma sequences must have equal, nonzero length"));
                }
                let sched = Schedule::Explicit { eps, gamma };
                for p in 1..=sched_len(&sched) {
                    sched.at(p as u32)?;
                }
                Ok(sched)
            }
            _ => Err(Error::spec("schedule", format!("unknown schedule kind `{kind}`"))),
        }
    }
}

string_serde!(Schedule);
string_serde!(PhaseStop);

fn sched_len(s: &Schedule) -> usize {
    match s {
        Schedule::Explicit { eps, .. } => eps.len(),
        _ => usize::MAX,
    }
}

/// `n_p = ⌈ln(π²p²/(3δ)) / γ_p⌉`.
pub fn phase_size(p: u32, gamma: f64, delta: f64) -> Result<usize> {
    if p == 0 {
        return Err(Error::domain("phases are numbered from 1"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let p = p as f64;
    let n = ((PI * PI * p * p / (3.0 * delta)).ln() / gamma).ceil();
    Ok(n as usize)
}

/// How new arms are drawn from the configuration population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfigSampler {
    /// i.i.d. uniform over `0..population`.
    WithReplacement { population: usize, seed: u64 },
    /// A fixed permutation of the population, consumed in order.
    WithoutReplacement { order: Vec<usize> },
    /// Draw `k` is configuration `k`; for oracles whose configurations are
    /// themselves i.i.d. draws.
    Unbounded,
}

impl ConfigSampler {
    pub fn with_replacement(population: usize, seed: u64) -> Result<Self> {
        if population == 0 {
            return Err(Error::domain("population is empty"));
        }
        Ok(ConfigSampler::WithReplacement { population, seed })
    }

    pub fn without_replacement(population: usize, seed: u64) -> Result<Self> {
        if population == 0 {
            return Err(Error::domain("population is empty"));
        }
        Ok(ConfigSampler::WithoutReplacement {
            order: rng::permutation(seed, DOMAIN_CONFIG_SAMPLE, population),
        })
    }

    /// Default sampler for an oracle: with replacement over a finite
    /// population, identity over an unbounded one.
    pub fn for_oracle(oracle: &dyn RuntimeOracle, seed: u64) -> Result<Self> {
        match oracle.num_configs() {
            Some(n) => Self::with_replacement(n, seed),
            None => Ok(ConfigSampler::Unbounded),
        }
    }

    /// Largest pool this sampler can fill, if bounded.
    pub fn capacity(&self) -> Option<usize> {
        match self {
            ConfigSampler::WithoutReplacement { order } => Some(order.len()),
            _ => None,
        }
    }

    /// Configuration id of draw `k` (0-based).
    pub fn draw(&self, k: usize) -> Option<usize> {
        match self {
            ConfigSampler::WithReplacement { population, seed } => {
                Some(rng::index(*seed, DOMAIN_CONFIG_SAMPLE, 0, k as u64, *population))
            }
            ConfigSampler::WithoutReplacement { order } => order.get(k).copied(),
            ConfigSampler::Unbounded => Some(k),
        }
    }

    /// `OPT^γ` of the population this sampler draws from.
    pub fn opt_gamma(&self, truth: &dyn GroundTruth, u: &UtilityFunction, gamma: f64) -> Result<f64> {
        let population: Vec<usize> = match self {
            ConfigSampler::WithReplacement { population, .. } => (0..*population).collect(),
            ConfigSampler::WithoutReplacement { order } => order.clone(),
            ConfigSampler::Unbounded => return truth.population_opt_gamma(u, gamma),
        };
        let values = population
            .into_iter()
            .map(|c| truth.true_utility(c, u))
            .collect::<Result<Vec<_>>>()?;
        opt_gamma_finite(&values, gamma)
    }
}

/// `OPT^γ` of a finite, uniformly weighted population: the largest value
/// `v` in the population with `Pr[U ≥ v] > γ`.
pub fn opt_gamma_finite(values: &[f64], gamma: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("population is empty"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("population contains NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len() as f64;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        // j values are ≥ v.
        if j as f64 / n > gamma {
            return Ok(v);
        }
        i = j;
    }
    Ok(sorted[sorted.len() - 1])
}

/// Issued when a phase terminates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCertificate {
    pub phase: u32,
    pub epsilon: f64,
    pub gamma: f64,
    pub n_p: usize,
    /// Arm index of `argmax LCB`.
    pub incumbent: usize,
    pub incumbent_config: usize,
    pub incumbent_name: String,
    pub incumbent_lcb: f64,
    pub ledger_seconds: f64,
    pub round: u64,
}

pub const CERTIFICATE_HEADER: [&str; 7] =
    ["phase", "epsilon_p", "gamma_p", "n_p", "incumbent_name", "incumbent_LCB", "ledger_seconds"];

pub fn write_certificates_csv<W: std::io::Write>(out: W, certs: &[PhaseCertificate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CERTIFICATE_HEADER)?;
    for c in certs {
        w.write_record([
            c.phase.to_string(),
            c.epsilon.to_string(),
            c.gamma.to_string(),
            c.n_p.to_string(),
            c.incumbent_name.clone(),
            c.incumbent_lcb.to_string(),
            c.ledger_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Stop rule for [`CoupRun::run_phases`]; checked before every step and
/// before every phase start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PhaseStop {
    MaxPhases(u32),
    BudgetSeconds(f64),
    MaxRounds(u64),
    Any(Vec<PhaseStop>),
}

impl PhaseStop {
    fn fires(&self, phases_done: u32, ledger: f64, round: u64) -> bool {
        match self {
            PhaseStop::MaxPhases(p) => phases_done >= *p,
            PhaseStop::BudgetSeconds(b) => ledger >= *b,
            PhaseStop::MaxRounds(r) => round >= *r,
            PhaseStop::Any(rules) => rules.iter().any(|r| r.fires(phases_done, ledger, round)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PhaseStop::BudgetSeconds(b) if !(*b >= 0.0) => {
                Err(Error::spec("stop", format!("budget must be >= 0, got {b}")))
            }
            PhaseStop::Any(rules) if rules.is_empty() => Err(Error::spec("stop", "empty rule list")),
            PhaseStop::Any(rules) => rules.iter().try_for_each(PhaseStop::validate),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PhaseStop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseStop::MaxPhases(p) => write!(f, "phases:{p}"),
            PhaseStop::BudgetSeconds(b) => write!(f, "budget:{b}"),
            PhaseStop::MaxRounds(r) => write!(f, "rounds:{r}"),
            PhaseStop::Any(rules) => {
                let parts: Vec<String> = rules.iter().map(|r| r.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// Parses `phases:3`, `budget:1000`, `rounds:500`, or a comma-separated list.
impl FromStr for PhaseStop {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        if parts.len() > 1 {
            let rules = parts.iter().map(|p| p.parse()).collect::<Result<Vec<_>>>()?;
            return Ok(PhaseStop::Any(rules));
        }
        let part = parts.first().copied().unwrap_or("");
        let (key, value) = part.split_once(':').unwrap_or((part, ""));
        let bad = || Error::spec("stop", format!("bad value in `{part}`"));
        let rule = match key {
            "phases" => PhaseStop::MaxPhases(value.parse().map_err(|_| bad())?),
            "budget" => PhaseStop::BudgetSeconds(value.parse().map_err(|_| bad())?),
            "rounds" => PhaseStop::MaxRounds(value.parse().map_err(|_| bad())?),
            _ => return Err(Error::spec("stop", format!("unknown phase stop rule `{part}`"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupOptions {
    pub delta: f64,
    pub doubling: DoublingRule,
    pub schedule: Schedule,
    /// When false, phases never end on their own (used to compare the inner
    /// loop against OUP).
    pub terminate_phases: bool,
}

impl Default for CoupOptions {
    fn default() -> Self {
        CoupOptions {
            delta: 0.01,
            doubling: DoublingRule::Old,
            schedule: Schedule::Default,
            terminate_phases: true,
        }
    }
}

/// Current phase parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub p: u32,
    pub n_p: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub ctx: BoundContext,
}

/// Final state of [`CoupRun::run_phases`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoupOutcome {
    pub certificates: Vec<PhaseCertificate>,
    /// Incumbent of the last finished phase, if any.
    pub recommendation: Option<usize>,
    pub rounds: u64,
    pub ledger_seconds: f64,
}

pub struct CoupRun {
    pool: Pool,
    sampler: ConfigSampler,
    schedule: Schedule,
    delta: f64,
    terminate_phases: bool,
    phase: Option<PhaseState>,
    in_phase: bool,
    certificates: Vec<PhaseCertificate>,
}

impl CoupRun {
    pub fn new(
        oracle: Arc<dyn RuntimeOracle>,
        sampler: ConfigSampler,
        u: UtilityFunction,
        opts: CoupOptions,
    ) -> Result<Self> {
        if !(opts.delta > 0.0 && opts.delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {}", opts.delta)));
        }
        opts.schedule.at(1)?;
        Ok(CoupRun {
            pool: Pool::new(oracle, &[], u, opts.doubling),
            sampler,
            schedule: opts.schedule,
            delta: opts.delta,
            terminate_phases: opts.terminate_phases,
            phase: None,
            in_phase: false,
            certificates: Vec::new(),
        })
    }

    pub fn arms(&self) -> &[ArmState] {
        &self.pool.arms
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

    pub fn phase(&self) -> Option<&PhaseState> {
        self.phase.as_ref()
    }

    pub fn certificates(&self) -> &[PhaseCertificate] {
        &self.certificates
    }

    pub fn oracle(&self) -> &Arc<dyn RuntimeOracle> {
        &self.pool.oracle
    }

    pub fn sampler(&self) -> &ConfigSampler {
        &self.sampler
    }

    /// Oracle configuration ids of the current pool, by arm index.
    pub fn pool_configs(&self) -> Vec<usize> {
        self.pool.arms.iter().map(ArmState::config).collect()
    }

    pub fn incumbent(&self) -> Result<usize> {
        self.pool.argmax_lcb()
    }

    /// `max UCB − max LCB` over the pool, clamped to `[0, 1]`.
    pub fn guaranteed_epsilon(&self) -> Result<f64> {
        self.pool.epsilon_raw()
    }

    /// Starts the next phase: grows the pool to `n_p` and refreshes every
    /// existing arm's bounds under the new context, without running anything.
    pub fn begin_phase(&mut self) -> Result<PhaseState> {
        let p = self.phase.map_or(1, |s| s.p + 1);
        let (epsilon, gamma) = self.schedule.at(p)?;
        let n_p = phase_size(p, gamma, self.delta)?;
        if let Some(cap) = self.sampler.capacity() {
            if n_p > cap {
                return Err(Error::PhaseUnsatisfiable { phase: p, requested: n_p, max_available: cap });
            }
        }
        while self.pool.arms.len() < n_p {
            let k = self.pool.arms.len();
            let config = self.sampler.draw(k).ok_or(Error::PhaseUnsatisfiable {
                phase: p,
                requested: n_p,
                max_available: k,
            })?;
            self.pool.add_arm(config);
        }
        let ctx = BoundContext::phased(p, self.pool.arms.len(), self.delta)?;
        for arm in &mut self.pool.arms {
            arm.rebound(&ctx, &self.pool.u)?;
        }
        let state = PhaseState { p, n_p, epsilon, gamma, ctx };
        self.phase = Some(state);
        self.in_phase = true;
        self.pool.reset_epsilon();
        Ok(state)
    }

    /// `max UCB − max LCB < ε_p` over the whole pool.
    pub fn phase_done(&self) -> Result<bool> {
        let state = self.phase.ok_or_else(|| Error::Invariant("no phase started".into()))?;
        Ok(self.terminate_phases && self.pool.gap()? < state.epsilon)
    }

    /// One pull of the max-UCB arm, with no elimination.
    pub fn phase_step(&mut self) -> Result<StepReport> {
        let state = self.phase.ok_or_else(|| Error::Invariant("no phase started".into()))?;
        let selected = self.pool.argmax_ucb()?;
        let out = self.pool.pull(selected, &state.ctx)?;
        self.pool.record(selected, out, Vec::new())
    }

    /// Closes the current phase and records its certificate.
    pub fn finish_phase(&mut self) -> Result<PhaseCertificate> {
        let state = self.phase.ok_or_else(|| Error::Invariant("no phase started".into()))?;
        let incumbent = self.pool.argmax_lcb()?;
        let arm = &self.pool.arms[incumbent];
        let cert = PhaseCertificate {
            phase: state.p,
            epsilon: state.epsilon,
            gamma: state.gamma,
            n_p: state.n_p,
            incumbent,
            incumbent_config: arm.config(),
            incumbent_name: self.pool.oracle.config_name(arm.config()),
            incumbent_lcb: arm.lcb(),
            ledger_seconds: self.pool.ledger.total_seconds(),
            round: self.pool.round,
        };
        self.certificates.push(cert.clone());
        self.in_phase = false;
        Ok(cert)
    }

    /// Runs phases until `stop` fires. An unfinished phase yields no
    /// certificate; the recommendation stays with the last finished one.
    pub fn run_phases(&mut self, stop: &PhaseStop) -> Result<CoupOutcome> {
        stop.validate()?;
        let halted = |run: &Self| {
            stop.fires(run.certificates.len() as u32, run.pool.ledger.total_seconds(), run.pool.round)
        };
        'phases: while !halted(self) {
            if !self.in_phase {
                self.begin_phase()?;
            }
            while !self.phase_done()? {
                if halted(self) {
                    break 'phases;
                }
                self.phase_step()?;
            }
            self.finish_phase()?;
        }
        Ok(self.outcome())
    }

    pub fn outcome(&self) -> CoupOutcome {
        CoupOutcome {
            certificates: self.certificates.clone(),
            recommendation: self.certificates.last().map(|c| c.incumbent),
            rounds: self.pool.round,
            ledger_seconds: self.pool.ledger.total_seconds(),
        }
    }
}
