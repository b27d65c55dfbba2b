//! Command-line front end: TOML run descriptions, experiment orchestration,
//! CSV artifacts and a JSON manifest per run.
//!
//! A run writes every artifact under the output directory with the
//! experiment id and a timestamp in the file name, then a manifest that echoes
//! the resolved config, the seed plan, wall times, the summary, envelope
//! checks and a SHA-256 digest of every file.

mod config;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::drivers::DriverError;
use crate::measure::MeasureError;
use crate::model::ModelError;
use crate::solver::SolverError;
use crate::study::StudyError;

pub use config::{parse_config, Experiment, RunConfig, POOL_FACTOR};
pub use run::{output_dir, run, run_with_threads, Check, OutputFile, RunManifest, RunOutcome, OUT_DIR_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("study: {0}")]
    Study(#[from] StudyError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("measure: {0}")]
    Measure(#[from] MeasureError),
    #[error("drivers: {0}")]
    Drivers(#[from] DriverError),
}
