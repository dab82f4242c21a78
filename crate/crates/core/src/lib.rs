//! Correlation analysis of single-particle interference patterns under
//! harmonic dephasing.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlate;
pub mod error;
pub mod events;
pub mod identify;
pub mod model;
pub mod pipeline;
pub mod reconstruct;
pub mod simulate;
pub mod spectrum;

pub use error::{Error, Result};
