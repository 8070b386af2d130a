//! Command-line front end: scenario files, link budgets, sweeps, feasibility
//! reports and simulation-vs-analytics comparison.

pub mod config;
pub mod error;
pub mod linkbudget;
pub mod report;
pub mod sweep;

pub use error::{CliError, CliResult, ConfigError};
