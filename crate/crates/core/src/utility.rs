//! Utility functions over runtime.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Weakly decreasing map from runtime in seconds to utility in `[0, 1]`.
///
/// The shape exponent of the log-Laplace family is called `a` so that it
/// does not collide with the confidence width α.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityFunction {
    /// `1 - (t/κ0)^a / 2` below κ0, `(κ0/t)^a / 2` from κ0 on.
    LogLaplace { kappa0: f64, a: f64 },
    /// `1 - t/κ0` below κ0, zero from κ0 on.
    Uniform { kappa0: f64 },
}

impl Default for UtilityFunction {
    fn default() -> Self {
        UtilityFunction::LogLaplace { kappa0: 60.0, a: 1.0 }
    }
}

impl UtilityFunction {
    pub fn log_laplace(kappa0: f64, a: f64) -> Result<Self> {
        check_kappa0(kappa0)?;
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::domain(format!("log-Laplace exponent must be positive, got {a}")));
        }
        Ok(UtilityFunction::LogLaplace { kappa0, a })
    }

    pub fn uniform(kappa0: f64) -> Result<Self> {
        check_kappa0(kappa0)?;
        Ok(UtilityFunction::Uniform { kappa0 })
    }

    pub fn kappa0(&self) -> f64 {
        match *self {
            UtilityFunction::LogLaplace { kappa0, .. } | UtilityFunction::Uniform { kappa0 } => kappa0,
        }
    }

    /// Utility of a run that took `t` seconds.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::domain(format!("runtime must be non-negative, got {t}")));
        }
        Ok(self.at(t))
    }

    /// Unchecked evaluation for callers that already hold a valid runtime.
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match *self {
            UtilityFunction::LogLaplace { kappa0, a } => {
                if t < kappa0 {
                    1.0 - 0.5 * (t / kappa0).powf(a)
                } else {
                    0.5 * (kappa0 / t).powf(a)
                }
            }
            UtilityFunction::Uniform { kappa0 } => {
                if t < kappa0 {
                    1.0 - t / kappa0
                } else {
                    0.0
                }
            }
        }
    }
}

fn check_kappa0(kappa0: f64) -> Result<()> {
    if kappa0.is_finite() && kappa0 > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("kappa0 must be positive, got {kappa0}")))
    }
}

impl fmt::Display for UtilityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilityFunction::LogLaplace { kappa0, a } => write!(f, "loglaplace:{kappa0}:{a}"),
            UtilityFunction::Uniform { kappa0 } => write!(f, "uniform:{kappa0}"),
        }
    }
}

/// Parses `loglaplace[:κ0[:a]]` or `uniform[:κ0]`; κ0 defaults to 60, `a` to 1.
impl FromStr for UtilityFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let mut num = |name: &str, default: f64| -> Result<f64> {
            match parts.next() {
                None => Ok(default),
                Some(v) => v
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::spec("utility", format!("bad {name} `{v}`"))),
            }
        };
        let u = match kind.as_str() {
            "loglaplace" | "log_laplace" | "ll" => {
                let kappa0 = num("kappa0", 60.0)?;
                let a = num("exponent", 1.0)?;
                UtilityFunction::log_laplace(kappa0, a)
            }
            "uniform" | "unif" => UtilityFunction::uniform(num("kappa0", 60.0)?),
            _ => return Err(Error::spec("utility", format!("unknown utility `{s}`"))),
        };
        if parts.next().is_some() {
            return Err(Error::spec("utility", format!("too many fields in `{s}`")));
        }
        u.map_err(|e| Error::spec("utility", e.to_string()))
    }
}
