//! Snapshot proper orthogonal decomposition (POD) of two-dimensional wake
//! velocity fields.
//!
//! The crate covers the whole analysis chain: gridded snapshot datasets
//! ([`field`]), the decomposition itself ([`pod`]), a synthetic vertical-axis
//! wind-turbine wake generator ([`synth`]), wake statistics ([`metrics`]) and
//! quantitative comparison of two decompositions ([`compare`]).

pub mod cli;
pub mod compare;
pub mod error;
pub mod export;
pub mod field;
pub mod metrics;
pub mod pod;
pub mod synth;

pub use error::{Error, Result};
