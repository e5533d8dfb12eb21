use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::{MeanModelSpec, ModelConfig};
use crate::error::{Error, Result};
use crate::stats::CorrelationMatrix;
use crate::trees::Forest;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanDraw {
    Forest(Forest),
    /// `d×q` coefficients for the configured linear basis.
    Linear(#[serde(with = "crate::linalg::rows")] DMatrix<f64>),
}

/// One kept MCMC snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub mean: MeanDraw,
    pub r: CorrelationMatrix,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Acceptance rate of the correlation step; `None` when it never ran.
    pub correlation_acceptance_rate: Option<f64>,
    pub tree_acceptance_rate: Option<f64>,
    /// Per label, mean over kept draws of the average tree depth.
    pub mean_tree_depth: Vec<f64>,
    /// `Σ_i log MVN(Z_i; G_i, R)` after every iteration.
    pub loglik_trace: Vec<f64>,
}

impl Diagnostics {
    /// True when the correlation step mixes suspiciously (rate < 0.05 or > 0.95).
    pub fn correlation_rate_flagged(&self) -> bool {
        self.correlation_acceptance_rate
            .is_some_and(|r| !(0.05..=0.95).contains(&r))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub config: ModelConfig,
    pub n_features: usize,
    pub n_labels: usize,
    pub draws: Vec<Draw>,
    pub diagnostics: Diagnostics,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    fn check_width(&self, p: usize) -> Result<()> {
        if p != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "model was trained on {} features, got {p}",
                self.n_features
            )));
        }
        Ok(())
    }

    /// `G(x)` under draw `d`.
    pub fn latent_mean(&self, d: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x.len())?;
        match (&self.draws[d].mean, &self.config.mean_model) {
            (MeanDraw::Forest(f), _) => f.predict_row(x),
            (MeanDraw::Linear(b), MeanModelSpec::LinearBasis(basis)) => {
                let h = basis.row(x);
                Ok((0..self.n_labels)
                    .map(|k| h.iter().enumerate().map(|(a, v)| v * b[(a, k)]).sum())
                    .collect())
            }
            (MeanDraw::Linear(_), MeanModelSpec::SumOfTrees) => {
                Err(Error::InvalidArgument("linear draw without a linear basis".into()))
            }
        }
    }

    /// `G(X)` (N×q) under draw `d`.
    pub fn latent_mean_matrix(&self, d: usize, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(x.ncols())?;
        match (&self.draws[d].mean, &self.config.mean_model) {
            (MeanDraw::Forest(f), _) => f.evaluate(x),
            (MeanDraw::Linear(b), MeanModelSpec::LinearBasis(basis)) => Ok(basis.design(x)? * b),
            (MeanDraw::Linear(_), MeanModelSpec::SumOfTrees) => {
                Err(Error::InvalidArgument("linear draw without a linear basis".into()))
            }
        }
    }

    /// Entrywise posterior mean of `R`.
    pub fn mean_correlation(&self) -> DMatrix<f64> {
        let q = self.n_labels;
        let mut acc = DMatrix::zeros(q, q);
        for d in &self.draws {
            acc += d.r.matrix();
        }
        acc / self.draws.len().max(1) as f64
    }

    /// Posterior means of the strict upper triangle of `R` (`r12, r13, r23, …`).
    pub fn mean_off_diagonal(&self) -> Vec<f64> {
        let m = self.mean_correlation();
        let q = self.n_labels;
        let mut out = Vec::new();
        for i in 0..q {
            for j in i + 1..q {
                out.push(m[(i, j)]);
            }
        }
        out
    }
}
