//! Command-line front end: configuration, reports, file output and the
//! subcommand implementations.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;

pub use error::{CliError, CliResult, EXIT_CONDITION, EXIT_OK, EXIT_USAGE};
