//! Orchestration for the `sugar` binary: config handling, subcommands and
//! the Monte Carlo experiment runner.

pub mod commands;
pub mod config;
pub mod experiment;

pub use config::{Model, RunConfig};
