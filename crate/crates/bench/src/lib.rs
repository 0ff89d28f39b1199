//! Batch experiments over `relaxcb`: seeded parallel runs, per-round traces,
//! regret summaries and verification reports.

pub mod checks;
pub mod config;
pub mod run;
pub mod summarize;

use std::path::Path;

use thiserror::Error;

pub use checks::run_checks;
pub use config::{CheckKind, Config, Resolved};
pub use run::{run_experiment, RunOutcome, TRACE_HEADER, TRACE_SCHEMA_VERSION};
pub use summarize::{summarize, RegretRow, Summary};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("trace schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] relaxcb::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// 1 for configuration and other errors, 2 for failed verification.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Verification(_) => 2,
            _ => 1,
        }
    }
}

/// Runs `f` on a pool of `jobs` workers (`0` = rayon's default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), BenchError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
