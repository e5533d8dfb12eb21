//! Probability primitives shared by the sampler, prediction and simulation code.

pub mod correlation;
pub mod normal;
pub mod orthant;
pub mod wishart;

pub use correlation::{
    conditional_normal_params, decompose_to_correlation, log_prior_rd, ConditionalWeights,
    CorrelationMatrix, CorrelationPriorConfig, ScaleDecomposition,
};
pub use normal::{norm_cdf, norm_pdf, norm_quantile, norm_sf, sample_truncated_normal, Side};
pub use orthant::{orthant_distribution, orthant_probability, OrthantEstimate};
pub use wishart::{log_inverse_wishart_density, sample_inverse_wishart};
