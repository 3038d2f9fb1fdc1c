//! Experiment runner: configuration, replica ensembles, statistics and
//! reports.
//!
//! Replica `r` of a run with base seed `s` draws its noise from
//! [`replica_seed`]`(s, r)`, whatever the worker count, and every level of
//! a multi-level experiment reuses that replica's path. Results are merged
//! in replica order, so the CSV output depends only on the configuration
//! and the package version.

mod config;
mod experiments;
mod record;
mod stats;

use std::path::Path;
use std::time::Instant;

pub use config::{
    EquationConfig, Experiment, ExperimentConfig, GridConfig, InitialConfig, KernelConfig, RegionConfig,
    SolverSection,
};
pub use record::{
    emit_all, emit_report, Aggregate, Cell, Check, ReportFormat, RunRecord, Table, CONFIG_FILE, RECORD_FILE,
    REPLICAS_FILE, SCHEMA_VERSION, SUMMARY_FILE,
};
pub use stats::{
    estimate_exceedance, mean, mean_interval, median, median_interval, replica_seed, second_moment_interval,
    variance_interval, wilson_interval, Exceedance, Interval, Z95,
};

use crate::error::{Error, Result};

/// Runs the configured experiment on `config.workers` threads.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start {} workers: {e}", config.workers)))?;
    let out = pool.install(|| experiments::dispatch(config))?;
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: config.experiment,
        config: config.clone(),
        replicas: config.replicas,
        excluded: out.excluded,
        replica_table: out.replica_table,
        summary_table: out.summary_table,
        aggregates: out.aggregates,
        checks: out.checks,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    debug_assert!(record.is_consistent());
    Ok(record)
}

/// [`run`] followed by [`emit_all`] into `config.output_dir`.
pub fn run_to_dir(config: &ExperimentConfig) -> Result<RunRecord> {
    let record = run(config)?;
    emit_all(&record, &config.output_dir)?;
    Ok(record)
}

/// Outcome of re-running a stored run.
#[derive(Debug, Clone)]
pub struct Replay {
    pub record: RunRecord,
    /// CSV files whose bytes differ from the stored ones.
    pub mismatched: Vec<String>,
}

/// Re-runs the snapshot in `run_dir` into `run_dir/replay` and compares the
/// CSV files byte for byte.
pub fn replay(run_dir: &Path) -> Result<Replay> {
    let mut config = ExperimentConfig::load(&run_dir.join(CONFIG_FILE))?;
    config.output_dir = run_dir.join("replay");
    let record = run_to_dir(&config)?;
    let mut mismatched = Vec::new();
    for name in [REPLICAS_FILE, SUMMARY_FILE] {
        let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(p, e));
        if read(&run_dir.join(name))? != read(&config.output_dir.join(name))? {
            mismatched.push(name.to_string());
        }
    }
    Ok(Replay { record, mismatched })
}
