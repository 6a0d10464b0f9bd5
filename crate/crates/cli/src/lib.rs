//! Library surface of the pipeline runner; the `cldfa` binary is a thin
//! wrapper so integration tests can drive commands in-process.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use config::{ExperimentConfig, RawConfig};
pub use error::{CliError, Result};
