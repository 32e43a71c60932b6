//! Configuration, verification suites and reporting for the `finslerb`
//! command-line runner.

pub mod config;
pub mod report;
pub mod suites;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config at '{key}': {message}")]
    Validation { key: String, message: String },
    #[error("engine error: {0}")]
    Engine(#[from] finslerb_core::Error),
}
