//! Multilabel classification with a vector of sum-of-trees models on a
//! latent multivariate-normal scale and an explicitly estimated label
//! correlation matrix.

pub mod artifact;
pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod predict;
pub mod rng;
pub mod sampler;
pub mod simulate;
pub mod stats;
pub mod trees;

pub use data::Dataset;
pub use error::{Error, Result};
pub use rng::RngStream;
