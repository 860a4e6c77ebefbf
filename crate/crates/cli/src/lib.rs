//! Experiment runner for the `ldpfl` simulator: configuration, presets,
//! metric files, reports and the acceptance suite.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::{Path, PathBuf};

pub mod accept;
pub mod app;
pub mod config;
pub mod presets;
pub mod rdp_cmd;
pub mod report;
pub mod run;

pub use config::{ConfigError, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_ACCEPTANCE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Core(ldpfl_core::Error),
    Io { path: PathBuf, source: std::io::Error },
    Schema(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(e) => e.fmt(f),
            CliError::Core(e) => write!(f, "runtime error: {e}"),
            CliError::Io { path, source } => write!(f, "io error on {}: {source}", path.display()),
            CliError::Schema(m) => write!(f, "schema error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<ldpfl_core::Error> for CliError {
    fn from(e: ldpfl_core::Error) -> Self {
        CliError::Core(e)
    }
}
