use std::path::Path;

use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF};

use crate::oracle::{GroundTruth, RuntimeOracle};
use crate::quadrature::{integrate, integrate_to_infinity};
use crate::rng::{self, DOMAIN_PARAMETER, DOMAIN_RUNTIME};
use crate::utility::UtilityFunction;
use crate::{Error, Result};

// Per-piece tolerance; the pieces of one expectation sum to well under 1e-9.
const PIECE_TOL: f64 = 1e-12;
const BREAK_QUANTILES: [f64; 9] = [1e-4, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.9999];

/// Runtime distribution of one synthetic configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum RuntimeDist {
    Exponential { mean: f64 },
    LogNormal { mu: f64, sigma: f64 },
    /// `t1` with probability `p`, otherwise `t2` (which may be infinite).
    TwoPoint {
        t1: f64,
        #[serde(with = "maybe_infinite")]
        t2: f64,
        p: f64,
    },
}

/// JSON has no infinity: an infinite value is written as the string `"inf"`.
mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => match t.trim() {
                "inf" | "infinity" | "Infinity" => Ok(f64::INFINITY),
                other => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got `{other}`"))),
            },
        }
    }
}

impl RuntimeDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RuntimeDist::Exponential { mean } => mean.is_finite() && mean > 0.0,
            RuntimeDist::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma > 0.0,
            RuntimeDist::TwoPoint { t1, t2, p } => {
                t1 >= 0.0 && t2 >= 0.0 && t1.is_finite() && !t2.is_nan() && (0.0..=1.0).contains(&p)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid runtime distribution {self:?}")))
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RuntimeDist::Exponential { mean } => Exp::new(1.0 / mean).expect("validated").sample(rng),
            RuntimeDist::LogNormal { mu, sigma } => {
                LogNormal::new(mu, sigma).expect("validated").sample(rng)
            }
            RuntimeDist::TwoPoint { t1, t2, p } => {
                if rng.random::<f64>() < p {
                    t1
                } else {
                    t2
                }
            }
        }
    }

    /// `Pr(t ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            RuntimeDist::Exponential { mean } => -(-x / mean).exp_m1(),
            RuntimeDist::LogNormal { mu, sigma } => {
                if x == f64::INFINITY {
                    1.0
                } else {
                    statrs_lognormal(mu, sigma).cdf(x)
                }
            }
            RuntimeDist::TwoPoint { t1, t2, p } => {
                let mut f = 0.0;
                if t1 <= x {
                    f += p;
                }
                if t2 <= x {
                    f += 1.0 - p;
                }
                f
            }
        }
    }

    /// `Pr(t < x)`: the probability that a run capped at `x` completes.
    pub fn completion_probability(&self, x: f64) -> f64 {
        match *self {
            RuntimeDist::TwoPoint { t1, t2, p } => {
                f64::from(u8::from(t1 < x)) * p + f64::from(u8::from(t2 < x)) * (1.0 - p)
            }
            _ => self.cdf(x),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            RuntimeDist::Exponential { mean } => (-x / mean).exp() / mean,
            RuntimeDist::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    statrs_lognormal(mu, sigma).pdf(x)
                }
            }
            RuntimeDist::TwoPoint { .. } => unreachable!("two-point mass has no density"),
        }
    }

    fn quantile(&self, q: f64) -> f64 {
        match *self {
            RuntimeDist::Exponential { mean } => -mean * (-q).ln_1p(),
            RuntimeDist::LogNormal { mu, sigma } => statrs_lognormal(mu, sigma).inverse_cdf(q),
            RuntimeDist::TwoPoint { .. } => unreachable!("two-point mass has no density"),
        }
    }

    /// `(E[u(min(t, κ))], Pr(t < κ))`. `κ = ∞` gives the uncapped utility.
    pub fn capped_utility(&self, u: &UtilityFunction, captime: f64) -> Result<(f64, f64)> {
        self.validate()?;
        if captime.is_nan() || captime < 0.0 {
            return Err(Error::domain(format!("captime must be non-negative, got {captime}")));
        }
        let cdf = self.completion_probability(captime);
        if let RuntimeDist::TwoPoint { t1, t2, p } = *self {
            let v = p * u.at(t1.min(captime)) + (1.0 - p) * u.at(t2.min(captime));
            return Ok((v, cdf));
        }
        if let (RuntimeDist::Exponential { mean }, UtilityFunction::Uniform { kappa0 }) = (*self, *u) {
            return Ok((exponential_uniform_closed_form(mean, kappa0, captime), cdf));
        }
        Ok((self.integrate_utility(u, captime), cdf))
    }

    fn integrate_utility(&self, u: &UtilityFunction, captime: f64) -> f64 {
        let mut points: Vec<f64> = BREAK_QUANTILES.iter().map(|&q| self.quantile(q)).collect();
        points.push(u.kappa0());
        points.retain(|&x| x > 0.0 && x < captime && x.is_finite());
        points.push(0.0);
        if captime.is_finite() {
            points.push(captime);
        }
        points.sort_by(|a, b| a.total_cmp(b));
        points.dedup();

        let integrand = |t: f64| u.at(t) * self.pdf(t);
        let mut total: f64 = points
            .windows(2)
            .map(|w| integrate(integrand, w[0], w[1], PIECE_TOL))
            .sum();
        if captime.is_finite() {
            total += u.at(captime) * (1.0 - self.cdf(captime));
        } else {
            let last = *points.last().expect("contains zero");
            total += integrate_to_infinity(integrand, last, PIECE_TOL);
        }
        total.clamp(0.0, 1.0)
    }
}

fn statrs_lognormal(mu: f64, sigma: f64) -> statrs::distribution::LogNormal {
    statrs::distribution::LogNormal::new(mu, sigma).expect("validated")
}

/// `E[u(min(t, κ))]` for `t ~ Exp(mean)` and the uniform utility.
fn exponential_uniform_closed_form(mean: f64, kappa0: f64, captime: f64) -> f64 {
    let lambda = 1.0 / mean;
    let c = captime.min(kappa0);
    let tail = (-lambda * c).exp();
    let below = (1.0 - tail) - ((1.0 - tail) / lambda - c * tail) / kappa0;
    let at_cap = if captime < kappa0 {
        (1.0 - captime / kappa0) * (-lambda * captime).exp()
    } else {
        0.0
    };
    below + at_cap
}

/// Finite pool of synthetic configurations with closed-form ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFamily {
    pub configs: Vec<RuntimeDist>,
    pub seed: u64,
}

impl SyntheticFamily {
    pub fn new(configs: Vec<RuntimeDist>, seed: u64) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::domain("a synthetic family needs at least one configuration"));
        }
        for d in &configs {
            d.validate()?;
        }
        Ok(SyntheticFamily { configs, seed })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SyntheticFamily { configs: self.configs.clone(), seed }
    }

    fn dist(&self, config: usize) -> Result<&RuntimeDist> {
        self.configs
            .get(config)
            .ok_or_else(|| Error::domain(format!("no configuration {config}")))
    }
}

impl RuntimeOracle for SyntheticFamily {
    fn runtime(&self, config: usize, instance: usize) -> Result<f64> {
        let dist = self.dist(config)?;
        let mut rng = rng::stream(self.seed, DOMAIN_RUNTIME, config as u64, instance as u64);
        Ok(dist.sample(&mut rng))
    }

    fn num_configs(&self) -> Option<usize> {
        Some(self.configs.len())
    }

    fn num_instances(&self) -> Option<usize> {
        None
    }
}

impl GroundTruth for SyntheticFamily {
    fn true_capped_utility(
        &self,
        config: usize,
        u: &UtilityFunction,
        captime: f64,
    ) -> Result<(f64, f64)> {
        self.dist(config)?.capped_utility(u, captime)
    }
}

/// Unbounded population: configuration `k` has `θ_k ~ U[0, 1]` and
/// exponential runtimes with mean `lo · (hi/lo)^θ_k`.
///
/// Expected utility falls as θ grows, so `OPT^γ` is the utility at `θ = γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricFamily {
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

impl ParametricFamily {
    pub fn new(lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
            return Err(Error::domain(format!("need 0 < lo <= hi, got lo={lo}, hi={hi}")));
        }
        Ok(ParametricFamily { lo, hi, seed })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ParametricFamily { seed, ..*self }
    }

    pub fn theta(&self, config: usize) -> f64 {
        rng::unit(self.seed, DOMAIN_PARAMETER, config as u64, 0)
    }

    pub fn mean_at(&self, theta: f64) -> f64 {
        self.lo * (self.hi / self.lo).powf(theta)
    }

    pub fn dist(&self, config: usize) -> RuntimeDist {
        RuntimeDist::Exponential { mean: self.mean_at(self.theta(config)) }
    }
}

impl RuntimeOracle for ParametricFamily {
    fn runtime(&self, config: usize, instance: usize) -> Result<f64> {
        let mut rng = rng::stream(self.seed, DOMAIN_RUNTIME, config as u64, instance as u64);
        Ok(self.dist(config).sample(&mut rng))
    }

    fn num_configs(&self) -> Option<usize> {
        None
    }

    fn num_instances(&self) -> Option<usize> {
        None
    }

    fn config_name(&self, config: usize) -> String {
        format!("theta={:.6}", self.theta(config))
    }
}

impl GroundTruth for ParametricFamily {
    fn true_capped_utility(
        &self,
        config: usize,
        u: &UtilityFunction,
        captime: f64,
    ) -> Result<(f64, f64)> {
        self.dist(config).capped_utility(u, captime)
    }

    fn population_opt_gamma(&self, u: &UtilityFunction, gamma: f64) -> Result<f64> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::domain(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        let dist = RuntimeDist::Exponential { mean: self.mean_at(gamma) };
        Ok(dist.capped_utility(u, f64::INFINITY)?.0)
    }
}

/// A synthetic oracle as described by a family spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Finite(SyntheticFamily),
    Parametric(ParametricFamily),
}

impl FamilySpec {
    pub fn seed(&self) -> u64 {
        match self {
            FamilySpec::Finite(f) => f.seed,
            FamilySpec::Parametric(f) => f.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            FamilySpec::Finite(f) => FamilySpec::Finite(f.with_seed(seed)),
            FamilySpec::Parametric(f) => FamilySpec::Parametric(f.with_seed(seed)),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `key = value` lines (`#` starts a comment):
    ///
    /// ```text
    /// family = exponential       # exponential | lognormal | two_point | mixed | parametric_exponential
    /// params = 1; 4; 30          # one group per configuration, `;`-separated
    /// n_configs = 3              # optional; a single group is replicated
    /// seed = 7
    /// ```
    ///
    /// Groups hold `mean`, `mu sigma` or `t1 t2 p`; with `mixed` each group
    /// starts with its family name. `parametric_exponential` takes `lo hi`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut family = None;
        let mut params = None;
        let mut n_configs = None;
        let mut seed = 0u64;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::spec("family spec", format!("line {}: expected key = value", lineno + 1))
            })?;
            let value = value.trim();
            match key.trim() {
                "family" => family = Some(value.to_ascii_lowercase()),
                "params" => params = Some(value.to_string()),
                "n_configs" => {
                    n_configs = Some(value.parse::<usize>().map_err(|_| {
                        Error::spec("n_configs", format!("not a count: `{value}`"))
                    })?)
                }
                "seed" => {
                    seed = value
                        .parse::<u64>()
                        .map_err(|_| Error::spec("seed", format!("not an integer: `{value}`")))?
                }
                other => return Err(Error::spec("family spec", format!("unknown key `{other}`"))),
            }
        }
        let family = family.ok_or_else(|| Error::spec("family", "missing"))?;
        let params = params.ok_or_else(|| Error::spec("params", "missing"))?;

        if family == "parametric_exponential" {
            let nums = parse_numbers(&params)?;
            let [lo, hi] = nums[..] else {
                return Err(Error::spec("params", "parametric_exponential takes `lo hi`"));
            };
            let fam = ParametricFamily::new(lo, hi, seed).map_err(|e| Error::spec("params", e.to_string()))?;
            return Ok(FamilySpec::Parametric(fam));
        }

        let mut configs = params
            .split(';')
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(|group| {
                if family == "mixed" {
                    let (name, rest) = group.split_once(char::is_whitespace).unwrap_or((group, ""));
                    parse_dist(&name.to_ascii_lowercase(), rest)
                } else {
                    parse_dist(&family, group)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(n) = n_configs {
            if configs.len() == 1 && n > 1 {
                configs = vec![configs[0]; n];
            } else if configs.len() != n {
                return Err(Error::spec(
                    "n_configs",
                    format!("{n} configurations declared but {} parameter groups given", configs.len()),
                ));
            }
        }
        SyntheticFamily::new(configs, seed)
            .map(FamilySpec::Finite)
            .map_err(|e| Error::spec("params", e.to_string()))
    }
}

fn parse_numbers(group: &str) -> Result<Vec<f64>> {
    group
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "inf" | "infinity" => Ok(f64::INFINITY),
            _ => s.parse::<f64>().map_err(|_| Error::spec("params", format!("not a number: `{s}`"))),
        })
        .collect()
}

fn parse_dist(family: &str, group: &str) -> Result<RuntimeDist> {
    let nums = parse_numbers(group)?;
    let dist = match (family, &nums[..]) {
        ("exponential", &[mean]) => RuntimeDist::Exponential { mean },
        ("lognormal", &[mu, sigma]) => RuntimeDist::LogNormal { mu, sigma },
        ("two_point", &[t1, t2, p]) => RuntimeDist::TwoPoint { t1, t2, p },
        ("exponential" | "lognormal" | "two_point", _) => {
            return Err(Error::spec("params", format!("wrong parameter count for {family}: `{group}`")))
        }
        _ => return Err(Error::spec("family", format!("unsupported family `{family}`"))),
    };
    dist.validate().map_err(|e| Error::spec("params", e.to_string()))?;
    Ok(dist)
}
