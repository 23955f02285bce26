//! Experiment front end for `ptbae`: configuration layering, run directories
//! and the subcommand implementations behind the `ptbae` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod run_dir;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
