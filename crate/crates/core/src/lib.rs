//! Uncertainty evaluation for segmentation ensembles.
//!
//! The crate scores ensembles of voxelwise probability maps against
//! multi-rater annotations (calibration, ambiguity modeling, failure
//! detection), compares two ensemble constructions with a paired case
//! bootstrap, plans grouped cross-validation and deep-ensemble training,
//! and simulates surrogate ensembles on synthetic multi-rater phantoms.

pub mod case;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod selective;
pub mod simkit;
pub mod splits;
pub mod stats;
pub mod volume;

pub use error::{Error, ErrorKind, Result};
