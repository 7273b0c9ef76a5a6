//! Simulation and verification laboratory for quantum quickest change-point
//! detection (QUSUM).
//!
//! The crate computes quantum and measured relative entropies for
//! finite-dimensional and Fock-truncated continuous-variable states,
//! optimizes POVMs (including joint block measurements on tensor powers),
//! runs the CUSUM detection loop on sampled measurement outcomes, and
//! reproduces the asymptotic delay / false-alarm trade-off
//! `delay ~ ln(T_FA) / D(sigma||rho)` at desk scale.
//!
//! Start with the runnable programs under `examples/`; each one exercises a
//! major capability end to end. The `qusum` binary exposes the same
//! functionality as subcommands.

pub mod cli;
pub mod detection;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod measurement;
pub mod povm_search;
pub mod rng;
pub mod states;

pub use error::{Error, Result};
