//! File formats, configuration, parallel evaluation and the command
//! dispatcher behind the `fracdec` binary.
//!
//! Every run is described by an [`ExperimentConfig`]; the subcommands of the
//! binary only build one. [`exec::run`] executes it and returns the
//! artifacts, each stamped with the tool version, a SHA-256 digest of the
//! canonical configuration, the seed and the random generator in use.

pub mod config;
pub mod error;
pub mod exec;
pub mod formats;
pub mod par;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use exec::{run, write_outcome, Outcome, Runtime};
