//! Configuration, file formats and subcommands for the `sdwave` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod svg;

pub use config::{RunConfig, Setup};
pub use error::{CliError, CliResult};
