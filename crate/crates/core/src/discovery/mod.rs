//! Causal discovery: passive mutual-information tests, variational graph inference and a
//! tabular identifiability oracle.

pub mod fcm;
pub mod mi;
pub mod variational;

pub use fcm::{proposition_check, proposition_trials, FcmSpec, PropositionReport, TabularFCM};
pub use mi::{estimate_mi, mi_samples, MiError, MISample};
pub use variational::{discovered_prior, train_variational, VariationalConfig, VariationalModel};
