//! Experiment harness: config files, parallel Monte Carlo drivers and CSV output.

pub mod config;
pub mod error;
pub mod experiments;
pub mod runner;
pub mod table;

pub use config::{Experiment, ExperimentConfig};
pub use error::{Error, Result};
pub use table::CsvTable;
