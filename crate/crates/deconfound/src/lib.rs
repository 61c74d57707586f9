//! Experiment harness for `deconfound-core`: file formats, configuration, the seed fan-out,
//! result bundles and the acceptance checklist.

pub mod bundle;
pub mod config;
pub mod experiments;
pub mod formats;
pub mod stats;

pub use bundle::{report, run, ResultBundle};
pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::Cache;
