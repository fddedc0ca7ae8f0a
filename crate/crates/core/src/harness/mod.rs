//! Experiment driver: config ingestion, Monte-Carlo runs over channel
//! realizations, CSV output and plot series.

mod config;
mod plot;
mod run;
mod verify;

use std::path::{Path, PathBuf};

pub use config::{snr_to_power, ExperimentConfig, Scheme, Sweep, SweepVar, ENV_PREFIX};
pub use plot::{emit_plot_data, parse_results, read_results};
pub use run::{
    aggregate, realization_seed, run_experiment, run_realization, AggregateRow, RealizationRecord, RunSummary,
    CSV_COLUMNS, METADATA_FILE, REALIZATIONS_FILE, RESULTS_FILE,
};
pub use verify::{closed_form_value, oracle_grid, random_mode_inputs, run_verification, CheckResult, VerifyOptions};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HarnessError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: u64, reason: String },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    /// Process exit code: 1 for configuration problems, 2 for I/O and
    /// unreadable inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::UnknownKey(_) | HarnessError::Config(_) => 1,
            HarnessError::Io { .. } | HarnessError::MalformedCsv { .. } => 2,
        }
    }
}
