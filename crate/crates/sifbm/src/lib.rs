//! Files, configuration and the command-line driver around `sifbm-core`.

pub mod battery;
pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod sample;

pub use commands::{run, Command, Outcome};
pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, CliResult};
