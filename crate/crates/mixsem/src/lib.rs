//! Files, parallel drivers and the command-line front end for
//! [`mixsem_core`].
//!
//! Everything numeric lives in the core crate. This crate reads and writes
//! CSV datasets and versioned JSON configs, evaluates credible-interval
//! quantiles, spreads Monte Carlo draws, bootstrap refits and simulation
//! replicates over a thread pool, and hosts the `mixsem` binary.

pub mod config;
pub mod error;
pub mod intervals;
pub mod io;
pub mod model;
pub mod parallel;
pub mod ppc;
pub mod reference;
pub mod study;

pub use error::{exit_code, Error, Result};
pub use mixsem_core as core;
