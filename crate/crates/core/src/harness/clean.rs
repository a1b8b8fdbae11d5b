use std::collections::HashMap;

use crate::arm::ArmState;
use crate::bounds::Captime;
use crate::oracle::GroundTruth;
use crate::utility::UtilityFunction;
use crate::Result;

/// Checks engine state against ground truth: whether an execution is still
/// clean and whether the bounds cover the true utilities.
///
/// An arm is clean when `|F̂ − F(κ)| ≤ α` and `|Û − U(κ)| ≤ (1 − u(κ))·α`.
pub struct CleanMonitor<'a> {
    truth: &'a dyn GroundTruth,
    u: UtilityFunction,
    capped: HashMap<(usize, Captime), (f64, f64)>,
    uncapped: HashMap<usize, f64>,
}

impl<'a> CleanMonitor<'a> {
    pub fn new(truth: &'a dyn GroundTruth, u: UtilityFunction) -> Self {
        CleanMonitor { truth, u, capped: HashMap::new(), uncapped: HashMap::new() }
    }

    /// `(U_i(κ), F_i(κ))`, cached.
    pub fn capped_truth(&mut self, config: usize, captime: Captime) -> Result<(f64, f64)> {
        if let Some(&v) = self.capped.get(&(config, captime)) {
            return Ok(v);
        }
        let v = self.truth.true_capped_utility(config, &self.u, captime.seconds())?;
        self.capped.insert((config, captime), v);
        Ok(v)
    }

    /// Uncapped `U_i`, cached.
    pub fn true_utility(&mut self, config: usize) -> Result<f64> {
        if let Some(&v) = self.uncapped.get(&config) {
            return Ok(v);
        }
        let v = self.truth.true_utility(config, &self.u)?;
        self.uncapped.insert(config, v);
        Ok(v)
    }

    pub fn arm_is_clean(&mut self, arm: &ArmState) -> Result<bool> {
        let Some(s) = arm.snapshot() else {
            return Ok(true);
        };
        let (u_true, f_true) = self.capped_truth(arm.config(), s.captime)?;
        Ok((s.f_hat - f_true).abs() <= s.alpha && (s.u_hat - u_true).abs() <= (1.0 - s.u_kappa) * s.alpha)
    }

    pub fn all_clean(&mut self, arms: &[ArmState]) -> Result<bool> {
        for arm in arms {
            if !self.arm_is_clean(arm)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `LCB_i ≤ U_i ≤ UCB_i` with the uncapped true utility.
    pub fn covers(&mut self, arm: &ArmState) -> Result<bool> {
        let u = self.true_utility(arm.config())?;
        Ok(arm.lcb() <= u && u <= arm.ucb())
    }

    pub fn all_covered(&mut self, arms: &[ArmState]) -> Result<bool> {
        for arm in arms {
            if !self.covers(arm)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
