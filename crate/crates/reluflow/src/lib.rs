//! Command-line runner, file formats and a parallel grid driver for
//! [`reluflow_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, run_grid_parallel};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
