//! GRU-D family of missingness-aware recurrent classifiers.
//!
//! - [`numeric`]: dense matrices, activations, seeded random streams.
//! - [`data`]: irregular time series, masking/interval derivation,
//!   normalization, resampling, splits and synthetic benchmarks.

pub mod artifact;
pub mod cells;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod numeric;
pub mod parallel;
pub mod training;

pub use error::{Error, Result};
