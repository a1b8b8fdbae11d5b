//! Per-round step reports and the trace CSV format.
//!
//! Trace CSV columns (header included, RFC 4180 quoting, `.` decimals):
//!
//! ```text
//! procedure,round,ledger_seconds,selected,doubled,eps_raw,eps_min,survivors,incumbent
//! ```
//!
//! `selected` and `incumbent` are arm indices of the procedure's pool.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// What one loop iteration did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub selected: usize,
    pub doubled: bool,
    pub runs_executed: u64,
    pub time_spent: f64,
    pub eliminations: Vec<usize>,
}

/// State after one loop iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: u64,
    pub ledger_seconds: f64,
    pub selected: usize,
    pub doubled: bool,
    pub eps_raw: f64,
    pub eps_min: f64,
    pub survivors: usize,
    pub incumbent: usize,
}

pub const TRACE_HEADER: [&str; 9] = [
    "procedure",
    "round",
    "ledger_seconds",
    "selected",
    "doubled",
    "eps_raw",
    "eps_min",
    "survivors",
    "incumbent",
];

/// Writes a trace, header first. Floats use the shortest representation
/// that round-trips, so identical runs give identical bytes.
pub fn write_trace_csv<W: Write>(out: W, procedure: &str, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            procedure.to_string(),
            r.round.to_string(),
            r.ledger_seconds.to_string(),
            r.selected.to_string(),
            r.doubled.to_string(),
            r.eps_raw.to_string(),
            r.eps_min.to_string(),
            r.survivors.to_string(),
            r.incumbent.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]; returns the procedure name
/// (empty for an empty trace) and the records.
pub fn read_trace_csv<R: Read>(input: R) -> Result<(String, Vec<TraceRecord>)> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::spec("trace", format!("unexpected header {header:?}")));
    }
    let mut procedure = String::new();
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |col: usize| Error::Load {
            row: i + 2,
            col: col + 1,
            msg: format!("bad value `{}`", &row[col]),
        };
        macro_rules! field {
            ($col:expr) => {
                row[$col].parse().map_err(|_| bad($col))?
            };
        }
        if procedure.is_empty() {
            procedure = row[0].to_string();
        } else if procedure != row[0] {
            return Err(Error::spec("trace", "more than one procedure in a single trace"));
        }
        records.push(TraceRecord {
            round: field!(1),
            ledger_seconds: field!(2),
            selected: field!(3),
            doubled: field!(4),
            eps_raw: field!(5),
            eps_min: field!(6),
            survivors: field!(7),
            incumbent: field!(8),
        });
    }
    Ok((procedure, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(
            (0u64..1_000_000, 0.0f64..1e9, 0usize..500, any::<bool>(), 0.0f64..=1.0, 0.0f64..=1.0, 1usize..500, 0usize..500),
            0..40,
        )) {
            let records: Vec<TraceRecord> = rows
                .into_iter()
                .map(|(round, ledger_seconds, selected, doubled, eps_raw, eps_min, survivors, incumbent)| TraceRecord {
                    round, ledger_seconds, selected, doubled, eps_raw, eps_min, survivors, incumbent,
                })
                .collect();
            let mut bytes = Vec::new();
            write_trace_csv(&mut bytes, "oup", &records).unwrap();
            let (procedure, back) = read_trace_csv(bytes.as_slice()).unwrap();
            prop_assert_eq!(back, records.clone());
            if !records.is_empty() {
                prop_assert_eq!(procedure, "oup");
            }
        }
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_trace_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
