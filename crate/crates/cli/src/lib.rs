//! Experiment runner for `dyadlab`: config schema, experiment execution,
//! CSV and manifest output, and the acceptance criteria.

pub mod config;
pub mod experiments;
pub mod report;
pub mod run;
pub mod suite;

pub use config::{parse_symbol, Experiment, ExperimentConfig};
pub use report::Status;
