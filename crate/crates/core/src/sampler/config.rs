use serde::{Deserialize, Serialize};

use super::linear::LinearBasisSpec;
use crate::error::{invalid, Result};
use crate::stats::CorrelationPriorConfig;
use crate::trees::TreePriorConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Estimate the label correlation matrix.
    Multivariate,
    /// Hold `R = I`: independent probit models per label.
    FixedIdentityR,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanModelSpec {
    SumOfTrees,
    LinearBasis(LinearBasisSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub tree_prior: TreePriorConfig,
    pub correlation_prior: CorrelationPriorConfig,
    pub mode: Mode,
    pub mean_model: MeanModelSpec,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults for `q` labels: 50 trees, 2000 iterations with 1000 burn-in.
    pub fn default_for(q: usize) -> Self {
        Self {
            iterations: 2000,
            burn_in: 1000,
            thin: 1,
            tree_prior: TreePriorConfig::default(),
            correlation_prior: CorrelationPriorConfig::default_for(q),
            mode: Mode::Multivariate,
            mean_model: MeanModelSpec::SumOfTrees,
            seed: 0,
        }
    }

    pub fn trees_per_label(&self) -> usize {
        self.tree_prior.b
    }

    /// Number of kept draws, `floor((iterations − burn_in) / thin)`.
    pub fn kept_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(invalid(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(invalid("thin must be >= 1"));
        }
        self.tree_prior.validate()?;
        self.correlation_prior.validate(q)?;
        if let MeanModelSpec::LinearBasis(b) = &self.mean_model {
            b.validate()?;
        }
        Ok(())
    }
}
