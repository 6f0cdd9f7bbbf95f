//! Driver for diabatic-ramp experiments: configs, single runs, parameter
//! sweeps, spectra, coupling tables and figure data.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod plot;
pub mod runner;
pub mod sweep;

pub use config::{ConfigLayers, ExperimentConfig};
pub use error::CliError;
