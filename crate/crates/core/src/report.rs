//! CSV measurement rows and their aggregation.
//!
//! Experiments emit one row per (seed, instance, quantity); `aggregate` groups
//! rows by every column except the seed and the value columns and reports
//! mean and standard error, so sweeps stay reproducible and machine-readable.

use crate::measure::MeasureValue;
use crate::rational::{format_rat, rat_to_f64};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv row {0} has {1} fields, header has {2}")]
    RaggedRow(usize, usize, usize),
    #[error("csv has no `{0}` column")]
    MissingColumn(String),
    #[error("row {0}: `{1}` is not a number")]
    BadNumber(usize, String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub const MEASUREMENT_HEADER: &str =
    "seed,n,k,d,p,rectangle_id,strategy,mode,value_num,value_den,value_float";

/// One measurement row in the shared schema.
#[derive(Clone, Debug, Serialize)]
pub struct MeasurementRow {
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub p: String,
    pub rectangle_id: String,
    pub strategy: String,
    pub mode: String,
    pub value: MeasureValue,
}

impl MeasurementRow {
    pub fn csv_line(&self) -> String {
        let (num, den, float) = match &self.value {
            MeasureValue::Exact(r) => (
                r.numer().to_string(),
                r.denom().to_string(),
                format!("{:.17e}", rat_to_f64(r)),
            ),
            MeasureValue::Approx(x) => (String::new(), String::new(), format!("{x:.17e}")),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.n,
            self.k,
            self.d,
            self.p,
            self.rectangle_id,
            self.strategy,
            self.mode,
            num,
            den,
            float
        )
    }
}

pub fn write_measurements<W: Write>(rows: &[MeasurementRow], w: &mut W) -> Result<(), ReportError> {
    writeln!(w, "{MEASUREMENT_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// A parsed CSV table.
#[derive(Clone, Debug)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn parse_csv(text: &str) -> Result<Table, ReportError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = match lines.next() {
        Some(h) => h.split(',').map(|s| s.trim().to_string()).collect(),
        None => {
            return Ok(Table {
                header: vec![],
                rows: vec![],
            })
        }
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != header.len() {
            return Err(ReportError::RaggedRow(i + 2, fields.len(), header.len()));
        }
        rows.push(fields);
    }
    Ok(Table { header, rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct AggregateRow {
    pub key: BTreeMap<String, String>,
    pub count: u64,
    pub mean: f64,
    pub stderr: f64,
}

/// Groups by every column except `seed` and the value columns, aggregating
/// `value_col` into mean and standard error of the mean.
pub fn aggregate(table: &Table, value_col: &str) -> Result<Vec<AggregateRow>, ReportError> {
    if table.header.is_empty() {
        return Ok(vec![]);
    }
    let vi = table
        .header
        .iter()
        .position(|h| h == value_col)
        .ok_or_else(|| ReportError::MissingColumn(value_col.to_string()))?;
    let excluded: Vec<usize> = table
        .header
        .iter()
        .enumerate()
        .filter(|(_, h)| *h == "seed" || h.starts_with("value"))
        .map(|(i, _)| i)
        .collect();
    let mut groups: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    for (ri, row) in table.rows.iter().enumerate() {
        let value: f64 = row[vi]
            .parse()
            .map_err(|_| ReportError::BadNumber(ri + 2, row[vi].clone()))?;
        let key: Vec<String> = row
            .iter()
            .enumerate()
            .filter(|(i, _)| !excluded.contains(i))
            .map(|(_, v)| v.clone())
            .collect();
        groups.entry(key).or_default().push(value);
    }
    let key_names: Vec<&String> = table
        .header
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded.contains(i))
        .map(|(_, h)| h)
        .collect();
    let mut out = Vec::new();
    for (key, values) in groups {
        let count = values.len() as u64;
        let mean = values.iter().sum::<f64>() / count as f64;
        let stderr = if count > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (count as f64 - 1.0);
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        out.push(AggregateRow {
            key: key_names
                .iter()
                .map(|s| s.to_string())
                .zip(key)
                .collect(),
            count,
            mean,
            stderr,
        });
    }
    Ok(out)
}

pub fn write_aggregate<W: Write>(
    rows: &[AggregateRow],
    key_names: &[String],
    w: &mut W,
) -> Result<(), ReportError> {
    writeln!(w, "{},count,mean,stderr", key_names.join(","))?;
    for r in rows {
        let keys: Vec<String> = key_names
            .iter()
            .map(|k| r.key.get(k).cloned().unwrap_or_default())
            .collect();
        writeln!(
            w,
            "{},{},{:.17e},{:.17e}",
            keys.join(","),
            r.count,
            r.mean,
            r.stderr
        )?;
    }
    Ok(())
}

/// Format helper for the `p` column.
pub fn p_column(p: &crate::rational::Rat) -> String {
    format_rat(p)
}
