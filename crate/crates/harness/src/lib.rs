//! Config parsing, seeded replication fan-out, CSV/manifest output and the
//! built-in self test behind the `tbandit` CLI.

pub mod config;
pub mod experiment;
pub mod lasso;
pub mod output;
pub mod selftest;

use std::path::PathBuf;

pub use config::{ExperimentConfig, LassoComparisonConfig, Setting, Variant};
pub use experiment::{plan_setting, replication_seed, replication_seeds, run_experiment, SettingSummary};
pub use lasso::{compare_lasso, ComparisonSummary};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] tensor_bandit::Error),
}

impl HarnessError {
    /// Config problems are usage errors; everything else is a runtime failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Parse { .. } | HarnessError::Invalid(_) => 2,
            HarnessError::Io { .. } | HarnessError::Model(_) => 1,
        }
    }
}
