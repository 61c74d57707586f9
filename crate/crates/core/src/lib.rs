//! Behavioral cloning under causal confusion, at desk scale.
//!
//! The crate is `no_std` and needs only `alloc`. It provides:
//!
//! - [`nn`]: a small dense network with analytic gradients and an Adam optimizer.
//! - [`env`]: a seeded MountainCar simulator with original, confounded and
//!   entangled observation wrappers.
//! - [`expert`]: a scripted expert, demonstration collection and a counted query oracle.
//! - [`policy`]: behavioral cloning, the graph-parameterized mixture policy and closed-loop
//!   evaluation.
//! - [`intervention`]: targeted interventions over causal graphs with a linear energy model.
//! - [`discovery`]: mutual-information diagnostics, variational graph discovery and a
//!   tabular interventional-identifiability oracle.
//! - [`dagger`]: the DAgger baseline.
//!
//! All randomness is drawn from explicitly seeded [`rng::SimRng`] generators.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dagger;
pub mod discovery;
pub mod env;
pub mod expert;
pub mod graph;
pub mod intervention;
pub mod nn;
pub mod policy;
pub mod rng;

pub use graph::CausalGraph;
