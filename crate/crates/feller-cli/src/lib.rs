//! Configuration ingestion, experiment orchestration and report emission
//! around `feller-core`.

pub mod config;
pub mod report;
pub mod runner;

pub use config::ConfigFile;
pub use report::{ReportBundle, ReportRow};
pub use runner::{run_experiment, RunError};
