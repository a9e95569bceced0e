//! Scenario-driven front end for the `ebesr` simulator.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{run, Command, RunOptions};
pub use config::{parse_config, Scenario};
pub use error::CliError;
