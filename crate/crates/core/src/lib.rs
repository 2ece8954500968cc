//! Unfolded sparse inversion for multibaseline SAR tomography.
//!
//! The crate covers the forward model ([`model`]), analytic weights by
//! mutual-coherence minimization ([`coherence`]), the HyperLISTA and
//! blockwise-thresholded inference engines ([`solver`]), hyperparameter
//! search ([`tuning`]), Monte Carlo detection benchmarks ([`benchmark`]),
//! file formats ([`io`]) and run configuration ([`config`]).

pub mod benchmark;
pub mod coherence;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod solver;
pub mod tuning;

pub use error::{Error, Result};
