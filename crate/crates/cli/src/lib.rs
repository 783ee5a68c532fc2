//! Driver for `brinkman-lab`: configuration, subcommands and run manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use error::{CliError, CliResult};
