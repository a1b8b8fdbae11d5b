use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::trace::TraceRecord;
use crate::{Error, Result};

/// A trace tagged with its procedure and a comparison key naming the
/// oracle, utility and seed it ran against.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTrace {
    pub procedure: String,
    pub key: String,
    pub records: Vec<TraceRecord>,
}

/// ε-versus-ledger-time step functions of several procedures on a shared
/// time axis. `columns[k][r]` is procedure `k`'s ε at `times[r]`, or `None`
/// before its first record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub procedures: Vec<String>,
    pub times: Vec<f64>,
    pub columns: Vec<Vec<Option<f64>>>,
}

impl CurveTable {
    pub fn column(&self, procedure: &str) -> Option<&[Option<f64>]> {
        let k = self.procedures.iter().position(|p| p == procedure)?;
        Some(&self.columns[k])
    }

    /// Ledger time at which `procedure` first reaches `eps` or below.
    pub fn time_to(&self, procedure: &str, eps: f64) -> Option<f64> {
        let col = self.column(procedure)?;
        self.times
            .iter()
            .zip(col)
            .find(|(_, v)| v.is_some_and(|v| v <= eps))
            .map(|(&t, _)| t)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["ledger_seconds".to_string()];
        header.extend(self.procedures.iter().cloned());
        w.write_record(&header)?;
        for (r, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.columns.iter().map(|c| c[r].map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Aligns the running-minimum ε of each trace on the union of their time
/// points. Each column is a non-increasing step function.
pub fn epsilon_vs_time_curve(traces: &[LabeledTrace]) -> Result<CurveTable> {
    if let Some(first) = traces.first() {
        if let Some(other) = traces.iter().find(|t| t.key != first.key) {
            return Err(Error::Comparison(format!(
                "`{}` ran on `{}` but `{}` ran on `{}`",
                first.procedure, first.key, other.procedure, other.key
            )));
        }
    }
    let mut times: Vec<f64> = traces
        .iter()
        .flat_map(|t| t.records.iter().map(|r| r.ledger_seconds))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let columns = traces
        .iter()
        .map(|t| {
            let mut col = Vec::with_capacity(times.len());
            let mut next = 0;
            let mut current: Option<f64> = None;
            for &time in &times {
                while next < t.records.len() && t.records[next].ledger_seconds <= time {
                    let e = t.records[next].eps_min;
                    current = Some(current.map_or(e, |c: f64| c.min(e)));
                    next += 1;
                }
                col.push(current);
            }
            col
        })
        .collect();
    Ok(CurveTable {
        procedures: traces.iter().map(|t| t.procedure.clone()).collect(),
        times,
        columns,
    })
}
