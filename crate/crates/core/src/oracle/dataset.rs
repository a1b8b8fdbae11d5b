use std::path::Path;

use crate::oracle::{GroundTruth, RuntimeOracle};
use crate::rng::{self, DOMAIN_INSTANCE_ORDER};
use crate::utility::UtilityFunction;
use crate::{Error, Result};

/// Matrix of true runtimes, one row per configuration, one column per
/// instance, replayed through a seeded column permutation.
#[derive(Clone, Debug, PartialEq)]
pub struct RuntimeMatrixDataset {
    runtimes: Vec<Vec<f64>>,
    names: Vec<String>,
    instance_order: Vec<usize>,
}

impl RuntimeMatrixDataset {
    /// Builds a dataset from in-memory rows; the column order is a seeded
    /// uniform permutation.
    pub fn from_rows(names: Vec<String>, runtimes: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if runtimes.is_empty() {
            return Err(Error::Load { row: 0, col: 0, msg: "dataset has no rows".into() });
        }
        if names.len() != runtimes.len() {
            return Err(Error::domain("one name per row is required"));
        }
        let width = runtimes[0].len();
        if width == 0 {
            return Err(Error::Load { row: 1, col: 2, msg: "row has no runtimes".into() });
        }
        for (r, row) in runtimes.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Load {
                    row: r + 1,
                    col: row.len().min(width) + 2,
                    msg: format!("ragged row: {} runtimes, expected {width}", row.len()),
                });
            }
            for (c, &t) in row.iter().enumerate() {
                if !(t.is_finite() && t >= 0.0) {
                    return Err(Error::Load {
                        row: r + 1,
                        col: c + 2,
                        msg: format!("runtime must be finite and non-negative, got {t}"),
                    });
                }
            }
        }
        Ok(RuntimeMatrixDataset {
            instance_order: rng::permutation(seed, DOMAIN_INSTANCE_ORDER, width),
            runtimes,
            names,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.runtimes.len()
    }

    pub fn width(&self) -> usize {
        self.instance_order.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.runtimes
    }

    pub fn instance_order(&self) -> &[usize] {
        &self.instance_order
    }
}

/// Reads the headerless runtime-matrix CSV: first field is the configuration
/// name, the rest are runtimes in seconds. Positions in errors are 1-based.
pub fn load_runtime_matrix(path: impl AsRef<Path>, seed: u64) -> Result<RuntimeMatrixDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_runtime_matrix(&text, seed)
}

pub(crate) fn parse_runtime_matrix(text: &str, seed: u64) -> Result<RuntimeMatrixDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut names = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row_no = r + 1;
        let record = record.map_err(|e| Error::Load { row: row_no, col: 0, msg: e.to_string() })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let mut fields = record.iter();
        let name = fields.next().unwrap_or_default().to_string();
        let mut row = Vec::with_capacity(record.len().saturating_sub(1));
        for (c, cell) in fields.enumerate() {
            let col_no = c + 2;
            let t: f64 = cell.parse().map_err(|_| Error::Load {
                row: row_no,
                col: col_no,
                msg: format!("non-numeric cell `{cell}`"),
            })?;
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Load {
                    row: row_no,
                    col: col_no,
                    msg: format!("runtime must be finite and non-negative, got `{cell}`"),
                });
            }
            row.push(t);
        }
        if row.is_empty() {
            return Err(Error::Load { row: row_no, col: 2, msg: "row has no runtimes".into() });
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Load {
                    row: row_no,
                    col: row.len().min(first.len()) + 2,
                    msg: format!("ragged row: {} runtimes, expected {}", row.len(), first.len()),
                });
            }
        }
        names.push(name);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Load { row: 0, col: 0, msg: "empty dataset".into() });
    }
    RuntimeMatrixDataset::from_rows(names, rows, seed)
}

impl RuntimeOracle for RuntimeMatrixDataset {
    fn runtime(&self, config: usize, instance: usize) -> Result<f64> {
        let row = self
            .runtimes
            .get(config)
            .ok_or_else(|| Error::domain(format!("no configuration {config}")))?;
        let col = *self.instance_order.get(instance).ok_or(Error::InstanceExhausted {
            config,
            instance,
            available: self.width(),
            achieved_epsilon: None,
        })?;
        Ok(row[col])
    }

    fn num_configs(&self) -> Option<usize> {
        Some(self.num_rows())
    }

    fn num_instances(&self) -> Option<usize> {
        Some(self.width())
    }

    fn config_name(&self, config: usize) -> String {
        self.names.get(config).cloned().unwrap_or_else(|| format!("c{config}"))
    }
}

/// Dataset-wide empirical means stand in for the unknown truth.
impl GroundTruth for RuntimeMatrixDataset {
    fn true_capped_utility(
        &self,
        config: usize,
        u: &UtilityFunction,
        captime: f64,
    ) -> Result<(f64, f64)> {
        let row = self
            .runtimes
            .get(config)
            .ok_or_else(|| Error::domain(format!("no configuration {config}")))?;
        let n = row.len() as f64;
        let util = row.iter().map(|&t| u.at(t.min(captime))).sum::<f64>() / n;
        let cdf = row.iter().filter(|&&t| t < captime).count() as f64 / n;
        Ok((util, cdf))
    }
}
