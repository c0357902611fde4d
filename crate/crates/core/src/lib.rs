//! Differential prototypes networks for per-treatment remission prediction:
//! data handling, the model and its training loop, cross-validated
//! evaluation and cluster interpretation.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod interpret;
pub mod model;
pub mod numerics;
mod parallel;
pub mod trainer;

pub use error::{Error, Result};

/// The 64-bit matrix used throughout the model and analysis code.
pub type Matrix = numerics::DenseMatrix<f64>;
/// 64-bit Adam state.
pub type Adam = numerics::AdamState<f64>;
