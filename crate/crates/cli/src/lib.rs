//! Experiment runner for `graphot`: subcommands, suites and reports.

pub mod commands;
pub mod error;
pub mod experiments;
pub mod io;
pub mod report;
pub mod svg;

pub use error::{CliError, Result};
pub use report::{Assertion, RunReport};
