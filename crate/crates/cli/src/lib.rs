//! Command-line front end: configuration and one CSV producer per
//! subcommand.

pub mod commands;
pub mod config;
pub mod error;

pub use config::ExperimentConfig;
pub use error::CliError;
