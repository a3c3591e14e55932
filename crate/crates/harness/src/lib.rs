//! Experiment harness for `eve-core`: JSON configs, seeded runs, CSV traces,
//! summaries and SVG charts, and the `eve` command line.

pub mod cli;
pub mod config;
pub mod output;
pub mod run;
pub mod summary;
pub mod svg;

use std::path::{Path, PathBuf};

/// Errors surfaced by the harness. [`HarnessError::exit_code`] maps them onto the
/// CLI contract.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: malformed JSON: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] eve_core::Error),
    #[error("{0}")]
    Failed(String),
}

impl HarnessError {
    pub fn config(field: &'static str, reason: impl Into<String>) -> Self {
        HarnessError::Config {
            field,
            reason: reason.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        HarnessError::Json {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for bad input, 2 for failures while solving.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Io { .. } | HarnessError::Json { .. } => 1,
            HarnessError::Core(e) => match e {
                eve_core::Error::InvalidConfig { .. }
                | eve_core::Error::InvalidGrid(_)
                | eve_core::Error::InvalidPolicy { .. }
                | eve_core::Error::DimensionMismatch { .. }
                | eve_core::Error::BetaBelowOne(_) => 1,
                _ => 2,
            },
            HarnessError::Failed(_) => 2,
        }
    }
}
