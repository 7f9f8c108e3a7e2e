//! The `srcsel` command line: synthetic data, statistics, the transfer-accuracy
//! matrix, pair features, predictor training, method comparison and the
//! candidate sweep.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use cli::Cli;
pub use config::RunConfig;
pub use error::CliError;
