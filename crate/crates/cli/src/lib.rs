//! Operator surface for robomorph: configuration files, run directories,
//! trace reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::{Backend, RunConfig};
pub use error::CliError;
