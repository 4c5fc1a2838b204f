//! Command-line driver and interactive session service for cost-aware
//! feature acquisition.

pub mod commands;
pub mod config;
pub mod error;
pub mod service;

pub use config::{Overrides, RunConfig};
pub use error::CliError;
