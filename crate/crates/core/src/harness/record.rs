//! Run records and their on-disk form.
//!
//! A run directory holds:
//!
//! - `config.toml`: the fully merged configuration (input to `replay`),
//! - `replicas.csv`: one row per completed replica, in replica order,
//! - `summary.csv`: one row per time, scale, level or kernel exponent,
//! - `record.json`: the [`RunRecord`], including both tables, aggregate
//!   statistics, checks, the excluded count and the wall time.
//!
//! The CSV files never contain timings, so a fixed configuration reproduces
//! them byte for byte. Column layouts are listed in `docs/csv-schema.md`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig};
use super::stats::Interval;
use crate::error::{Error, Result};

/// Bumped whenever a field of [`RunRecord`] or a CSV layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// A CSV cell. Non-finite numbers are stored as [`Cell::Empty`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn float(x: f64) -> Self {
        if x.is_finite() {
            Cell::Float(x)
        } else {
            Cell::Empty
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Float(x) => Some(x),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        // seeds above i64::MAX keep their exact digits
        i64::try_from(v).map(Cell::Int).unwrap_or_else(|_| Cell::Text(v.to_string()))
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::float)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of column `name`, `None` for empty cells.
    pub fn numbers(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.column(name)?;
        Some(self.rows.iter().map(|r| r[c].as_f64()).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serde(e.to_string());
        w.write_record(&self.columns).map_err(ser)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(ser)?;
        }
        w.into_inner().map_err(|e| Error::Serde(e.to_string()))
    }
}

/// An aggregate statistic with its 95% interval when one is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub name: String,
    pub value: Option<f64>,
    pub interval: Option<Interval>,
}

impl Aggregate {
    pub fn new(name: impl Into<String>, value: f64, interval: Option<Interval>) -> Self {
        Aggregate {
            name: name.into(),
            value: value.is_finite().then_some(value),
            interval: interval.filter(|i| i.low.is_finite() && i.high.is_finite()),
        }
    }
}

/// A pass/fail verdict computed by the experiment itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    /// Package version that produced the record.
    pub version: String,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub replicas: usize,
    /// Replicas dropped after a numerical blow-up.
    pub excluded: usize,
    pub replica_table: Table,
    pub summary_table: Table,
    pub aggregates: Vec<Aggregate>,
    pub checks: Vec<Check>,
    pub wall_time_secs: f64,
}

impl RunRecord {
    pub fn aggregate(&self, name: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Completed plus excluded replicas equal the requested count.
    pub fn is_consistent(&self) -> bool {
        self.replica_table.rows.len() + self.excluded == self.replicas
    }

    /// More than half of the replicas blew up.
    pub fn mostly_blown_up(&self) -> bool {
        2 * self.excluded > self.replicas
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CONFIG_FILE: &str = "config.toml";
pub const REPLICAS_FILE: &str = "replicas.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RECORD_FILE: &str = "record.json";

fn write(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `record` into `dir` in `format`, always together with the
/// configuration snapshot. Returns the files written.
pub fn emit_report(record: &RunRecord, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = vec![write(dir.join(CONFIG_FILE), record.config.to_toml()?.as_bytes())?];
    match format {
        ReportFormat::Csv => {
            out.push(write(dir.join(REPLICAS_FILE), &record.replica_table.to_csv()?)?);
            out.push(write(dir.join(SUMMARY_FILE), &record.summary_table.to_csv()?)?);
        }
        ReportFormat::Json => out.push(write(dir.join(RECORD_FILE), record.to_json()?.as_bytes())?),
    }
    Ok(out)
}

/// Both formats.
pub fn emit_all(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = emit_report(record, dir, ReportFormat::Csv)?;
    files.extend(emit_report(record, dir, ReportFormat::Json)?.into_iter().skip(1));
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> RunRecord {
        let config = ExperimentConfig::preset(Experiment::LocalizationProb);
        let mut replica_table = Table::new(["replica", "seed", "value"]);
        replica_table.push(vec![0usize.into(), u64::MAX.into(), 0.25.into()]);
        replica_table.push(vec![1usize.into(), 7u64.into(), f64::NAN.into()]);
        let mut summary_table = Table::new(["level", "note"]);
        summary_table.push(vec![3u32.into(), "a,b".into()]);
        RunRecord {
            schema_version: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").into(),
            experiment: config.experiment,
            replicas: 3,
            config,
            excluded: 1,
            replica_table,
            summary_table,
            aggregates: vec![Aggregate::new(
                "p",
                0.5,
                Some(Interval { low: 0.4, high: 0.6 }),
            )],
            checks: vec![Check {
                name: "ok".into(),
                passed: true,
                detail: String::new(),
            }],
            wall_time_secs: 1.5,
        }
    }

    #[test]
    fn json_round_trip() {
        let r = record();
        assert!(r.is_consistent());
        assert_eq!(RunRecord::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn csv_layout() {
        let r = record();
        let text = String::from_utf8(r.replica_table.to_csv().unwrap()).unwrap();
        assert_eq!(text, "replica,seed,value\n0,18446744073709551615,0.25\n1,7,\n");
        let text = String::from_utf8(r.summary_table.to_csv().unwrap()).unwrap();
        assert_eq!(text, "level,note\n3,\"a,b\"\n");
    }

    #[test]
    fn empty_run_still_writes_files() {
        let mut r = record();
        r.replica_table.rows.clear();
        r.summary_table.rows.clear();
        r.excluded = r.replicas;
        let dir = tempfile::tempdir().unwrap();
        let files = emit_all(&r, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let csv = fs::read_to_string(dir.path().join(REPLICAS_FILE)).unwrap();
        assert_eq!(csv, "replica,seed,value\n");
        let back = RunRecord::from_json(&fs::read_to_string(dir.path().join(RECORD_FILE)).unwrap()).unwrap();
        assert_eq!(back, r);
        let snapshot = ExperimentConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
        assert_eq!(snapshot, r.config);
    }

    #[test]
    fn unwritable_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let err = emit_report(&record(), &blocker.join("sub"), ReportFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
