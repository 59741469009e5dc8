//! Command-line front end for `fuzzymon-core`: config parsing, the
//! `evolve`, `sample`, `figure` and `regime` commands and their output files.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, CliError, Command, Outcome};
pub use config::{ConfigError, ExperimentConfig, Format};
