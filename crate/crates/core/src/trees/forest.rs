use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::tree::Tree;
use crate::error::{Error, Result};

/// `q` sum-of-trees models with `b` trees each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_features: usize,
    pub trees: Vec<Vec<Tree>>,
}

impl Forest {
    /// All-stump forest with zero leaves.
    pub fn zeros(q: usize, b: usize, n_features: usize) -> Self {
        Self {
            n_features,
            trees: vec![vec![Tree::stump(0.0); b]; q],
        }
    }

    pub fn n_labels(&self) -> usize {
        self.trees.len()
    }

    pub fn trees_per_label(&self) -> usize {
        self.trees.first().map_or(0, Vec::len)
    }

    /// Sum of the trees of label `k` at one point.
    #[inline]
    pub fn label_value<F: Fn(usize) -> f64 + Copy>(&self, k: usize, feature: F) -> f64 {
        self.trees[k].iter().map(|t| t.value_at(feature)).sum()
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "forest expects {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        Ok((0..self.n_labels()).map(|k| self.label_value(k, |v| x[v])).collect())
    }

    /// `G[i][k] = Σ_j g(x_i; T_kj, M_kj)`.
    pub fn evaluate(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "forest expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        let mut g = DMatrix::zeros(x.nrows(), self.n_labels());
        for (k, trees) in self.trees.iter().enumerate() {
            for t in trees {
                for i in 0..x.nrows() {
                    g[(i, k)] += t.value_at(|v| x[(i, v)]);
                }
            }
        }
        Ok(g)
    }

    /// Mean over trees of the deepest-leaf depth, per label.
    pub fn mean_depth(&self) -> Vec<f64> {
        self.trees
            .iter()
            .map(|ts| ts.iter().map(|t| t.depth() as f64).sum::<f64>() / ts.len().max(1) as f64)
            .collect()
    }
}
