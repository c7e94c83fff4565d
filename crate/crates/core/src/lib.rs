//! Bayesian regression of a scalar response on symmetric network
//! predictors, with a low-rank network-lasso prior on the edge
//! coefficients and Gibbs sampling for inference.

// Negated comparisons reject NaN; index loops follow the algebra.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::result_large_err
)]

pub mod commands;
pub mod config;
pub mod distributions;
pub mod error;
pub mod fit;
pub mod gibbs;
pub mod graph;
pub mod model;
pub mod posterior;
pub mod rng;
pub mod simgen;

pub use error::{Error, Result};
