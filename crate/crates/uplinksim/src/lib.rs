//! Scenario files, CSV export and the `uplinksim` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod table;

pub use error::CliError;
