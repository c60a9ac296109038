//! Command-line front end: configuration files, presets and the four
//! subcommands.

pub mod commands;
pub mod config;

pub use commands::{CliError, Context};
