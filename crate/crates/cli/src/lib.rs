//! Batch driver: read a job file, run it, write CSV or JSON.

pub mod config;
pub mod error;
pub mod jobs;
pub mod output;
pub mod validate;

use std::path::{Path, PathBuf};

use config::{JobConfig, QuerySpec};
pub use error::CliError;
use output::Table;

/// Command-line overrides applied on top of the job file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Result table and, for `validate`, the number of failed checks.
#[derive(Debug, Clone)]
pub struct JobOutput {
    pub table: Table,
    pub failed: usize,
}

/// Runs a parsed job without touching the file system.
pub fn execute(cfg: &JobConfig, seed: Option<u64>) -> Result<JobOutput, CliError> {
    let table = match &cfg.query {
        QuerySpec::Moments { polynomial, x0 } => jobs::moments(cfg, polynomial, x0)?,
        QuerySpec::Correlation {} => jobs::correlations(cfg)?,
        QuerySpec::CrossMoments { p, q } => jobs::cross_moments(cfg, p, q)?,
        QuerySpec::Simulate { x0 } => jobs::simulate(cfg, x0.as_deref(), &cfg.sim.resolve(seed)?)?,
        QuerySpec::Validate { suites, x0 } => {
            let out = validate::run(cfg, suites, x0.as_deref(), &cfg.sim.resolve(seed)?)?;
            return Ok(JobOutput { table: out.table, failed: out.failed });
        }
    };
    Ok(JobOutput { table, failed: 0 })
}

/// Loads `config_path`, runs the job and writes its output. Validation
/// failures still write the table before reporting the error.
pub fn run(config_path: &Path, overrides: &Overrides) -> Result<PathBuf, CliError> {
    let cfg = config::load(config_path)?;
    let out = execute(&cfg, overrides.seed)?;
    let path = overrides.output.clone().unwrap_or_else(|| cfg.output.path.clone());
    out.table.write(&path, cfg.output.format)?;
    log::info!("wrote {} rows to {}", out.table.rows.len(), path.display());
    if out.failed > 0 {
        return Err(CliError::Validation { failed: out.failed, total: out.table.rows.len() });
    }
    Ok(path)
}
