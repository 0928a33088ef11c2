//! Command-line front end: configuration, subcommands and output files.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use args::{run, Cli};
pub use config::RunConfig;
pub use error::CliError;
