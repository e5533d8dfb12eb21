//! The MCMC sampler: latent Gibbs draws, per-tree backfitting and the
//! parameter-expanded Metropolis-Hastings update of the correlation matrix.

pub mod chain;
pub mod config;
pub mod draws;
pub mod linear;

pub use chain::{
    correlation_log_acceptance, log_residual_loglik, run_chain, tree_log_acceptance, ChainState, MeanState, Sampler,
};
pub use config::{MeanModelSpec, Mode, ModelConfig};
pub use draws::{Diagnostics, Draw, MeanDraw, PosteriorDraws};
pub use linear::{draw_linear_coefficients, BasisTerm, LinearBasisSpec};
