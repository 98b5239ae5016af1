//! Config-driven front end for `ibvp-core`: `validate`, `green`, `solve`
//! and `certify` produce deterministic JSON reports or CSV tables.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{run, Command, Format, Options, Output};
pub use config::{LoadedConfig, RunConfig};

/// Operational failures. Numerical outcomes such as a violated hypothesis
/// or a failed condition are results, not errors.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: {message}")]
    Config { location: String, message: String },
    #[error("{0}")]
    Numerics(String),
    #[error("cannot write report: {0}")]
    Report(String),
    #[error("{0}")]
    Usage(String),
}
