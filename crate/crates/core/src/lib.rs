//! ReLU classifiers for labelled unions of thickened manifolds.
//!
//! The crate builds explicit ReLU networks that approximate indicators of
//! balls, solid tori and their unions, estimates their risk by Monte Carlo,
//! and recovers the homology of sampled shapes through nerve complexes.

// `!(x > 0.0)` rejects NaN as well; that is the intent everywhere.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod homology;
pub mod indicator_synth;
pub mod nerve;
pub mod pipeline;
pub mod pwl_synth;
pub mod relu_core;
pub mod shapes_sampling;
pub mod simplicial_map;

pub use error::{Error, Result};
