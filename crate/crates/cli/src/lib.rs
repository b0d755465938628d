//! Experiment harness: configuration, synthetic data, runs with CSV traces
//! and the invariant-check suites behind the `geominimax` binary.

// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use geominimax_core::Error as CoreError;

pub mod check;
pub mod config;
pub mod dataset;
pub mod experiment;

pub use check::{run_check, CheckLine, CheckTarget};
pub use config::{ExperimentConfig, ProblemKind};
pub use dataset::generate_dataset;
pub use experiment::{run_experiment, run_replicates, ExperimentSummary, TRACE_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code: 1 usage/config, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Core(CoreError::Parameter { .. }) => 1,
            HarnessError::Core(_) => 2,
            HarnessError::Io { .. } => 3,
        }
    }
}
