//! Batch driver for `sobolev-lab-core` studies.
//!
//! A study is described by a small `key = value` config file (see
//! [`study::StudyConfig`]). Running it writes `<name>.csv` with the raw
//! sequences and `<name>.summary.txt` with verdicts and fitted slopes.

pub mod config;
pub mod output;
pub mod run;
pub mod study;

use std::path::{Path, PathBuf};

pub use output::{StudyOutput, Table};
pub use run::run_study;
pub use study::{StudyConfig, StudyKind};

/// Failures of the driver, each with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// The config does not parse or validate.
    #[error("invalid config: {0}")]
    Validation(String),
    /// The core rejected or failed the computation.
    #[error(transparent)]
    Numeric(#[from] sobolev_lab_core::Error),
    /// Output files could not be written.
    #[error("cannot write outputs: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// `2` for validation errors, `3` for everything raised while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) => 2,
            LabError::Numeric(_) | LabError::Io(_) => 3,
        }
    }
}

/// Runs `cfg` on a pool of at most `jobs` workers (all cores when `None`)
/// and writes its outputs to `out_dir`. On failure no output file remains.
pub fn run_to_dir(cfg: &StudyConfig, out_dir: &Path, jobs: Option<usize>) -> Result<(PathBuf, PathBuf), LabError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| LabError::Validation(format!("cannot start {jobs:?} workers: {e}")))?;
    match pool.install(|| run_study(cfg)) {
        Ok(out) => output::write_outputs(out_dir, &cfg.name, &out),
        Err(e) => {
            output::remove_outputs(out_dir, &cfg.name);
            Err(e)
        }
    }
}
