//! Mixture models with noise dimensions for ordinal data, fitted by pairwise likelihood.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod datasets;
pub mod em;
pub mod error;
pub mod model;
pub mod numerics;
pub mod pairwise;
pub mod selection;
pub mod simulate;

pub use error::{Error, Result};
