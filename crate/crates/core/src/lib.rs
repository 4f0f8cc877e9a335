//! Evaluation engine for gambling-like risk behaviour in decision-making agents.

// Negated comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod analysis;
pub mod distribution;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optimize;
pub mod prospect;
pub mod risk;
pub mod rng;
pub mod tasks;
pub mod training;

pub use error::{Error, Result};
