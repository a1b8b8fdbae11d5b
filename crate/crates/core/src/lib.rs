//! Utilitarian algorithm configuration with capped runs.
//!
//! The crate searches a pool of algorithm configurations for one with
//! (near-)maximal expected utility, where utility is a weakly decreasing
//! function of runtime and every run may be capped at a captime.
//!
//! - [`oup`]: UCB arm selection over a finite pool with captime doubling,
//!   elimination and an anytime ε certificate.
//! - [`coup`]: phased search over a sampled, growing pool with `(ε_p, γ_p)`
//!   certificates at the end of every phase.
//! - [`baselines`]: round-robin elimination (UP), the naive Hoeffding
//!   procedure and Successive Halving.
//! - [`harness`]: experiment specs, trace/summary emission, curves and
//!   Monte Carlo guarantee validation.
//!
//! Runtimes come from a [`oracle::RuntimeOracle`]: either a runtime matrix
//! loaded from CSV or a synthetic family with analytic ground truth. All
//! time is simulated, so every run is exactly reproducible from its seed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

// Serde through the type's `Display` / `FromStr` pair.
macro_rules! string_serde {
    ($t:ty) => {
        impl TryFrom<String> for $t {
            type Error = crate::Error;

            fn try_from(s: String) -> crate::Result<Self> {
                s.parse()
            }
        }

        impl From<$t> for String {
            fn from(v: $t) -> String {
                v.to_string()
            }
        }
    };
}

pub mod arm;
pub mod baselines;
pub mod bounds;
pub mod coup;
pub mod error;
pub mod harness;
pub mod ledger;
pub mod oracle;
pub mod oup;
mod pool;
mod quadrature;
pub mod rng;
pub mod trace;
pub mod utility;

pub use error::{Error, Result};
