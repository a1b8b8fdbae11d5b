use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ledger::CostLedger;
use crate::oracle::{GroundTruth, RuntimeOracle};
use crate::utility::UtilityFunction;
use crate::Result;

/// Ledger seconds of one arm next to its true utility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub arm: usize,
    pub config: usize,
    pub name: String,
    pub true_utility: f64,
    pub seconds: f64,
}

/// Per-arm time breakdown, best true utility first (lowest arm index on
/// ties).
pub fn per_config_time_profile(
    pool_configs: &[usize],
    ledger: &CostLedger,
    truth: &dyn GroundTruth,
    oracle: &dyn RuntimeOracle,
    u: &UtilityFunction,
) -> Result<Vec<ProfileRow>> {
    let mut rows = pool_configs
        .iter()
        .enumerate()
        .map(|(arm, &config)| {
            Ok(ProfileRow {
                arm,
                config,
                name: oracle.config_name(config),
                true_utility: truth.true_utility(config, u)?,
                seconds: ledger.seconds_for(arm),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.true_utility.total_cmp(&a.true_utility).then(a.arm.cmp(&b.arm)));
    Ok(rows)
}

pub fn write_profile_csv<W: Write>(out: W, rows: &[ProfileRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["arm", "config", "name", "true_utility", "seconds"])?;
    for r in rows {
        w.write_record([
            r.arm.to_string(),
            r.config.to_string(),
            r.name.clone(),
            r.true_utility.to_string(),
            r.seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
