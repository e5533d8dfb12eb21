use serde::{Deserialize, Serialize};

use super::tree::Tree;
use crate::error::{invalid, Result};

/// Tree-shape prior `P(node at depth d splits) = α/(1+d)^β` plus the leaf
/// prior scale, `σ_μ = 3/(r√b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreePriorConfig {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub b: usize,
}

impl Default for TreePriorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            beta: 2.0,
            r: 2.0,
            b: 50,
        }
    }
}

impl TreePriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.r > 0.0) {
            return Err(invalid(format!("r must be > 0, got {}", self.r)));
        }
        if self.b == 0 {
            return Err(invalid("need at least one tree per label"));
        }
        Ok(())
    }

    pub fn sigma_mu(&self) -> f64 {
        3.0 / (self.r * (self.b as f64).sqrt())
    }

    pub fn sigma_mu2(&self) -> f64 {
        self.sigma_mu().powi(2)
    }

    pub fn split_probability(&self, depth: usize) -> f64 {
        self.alpha / (1.0 + depth as f64).powf(self.beta)
    }

    pub fn log_split(&self, depth: usize) -> f64 {
        self.split_probability(depth).ln()
    }

    /// `log(1 − α/(1+d)^β)`; `-inf` when the node must split.
    pub fn log_no_split(&self, depth: usize) -> f64 {
        (-self.split_probability(depth)).ln_1p()
    }
}

/// Log prior probability of the tree's shape (split rules excluded).
pub fn log_structure_prior(tree: &Tree, prior: &TreePriorConfig) -> f64 {
    tree.nodes()
        .iter()
        .map(|n| {
            if n.is_leaf() {
                prior.log_no_split(n.depth)
            } else {
                prior.log_split(n.depth)
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::tree::SplitRule;

    fn recursive_oracle(tree: &Tree, id: usize, depth: usize, alpha: f64, beta: f64) -> f64 {
        let p = alpha / (1.0 + depth as f64).powf(beta);
        match tree.children(id) {
            None => (1.0 - p).ln(),
            Some((l, r)) => {
                p.ln() + recursive_oracle(tree, l, depth + 1, alpha, beta) + recursive_oracle(tree, r, depth + 1, alpha, beta)
            }
        }
    }

    #[test]
    fn sigma_mu_follows_r_and_b() {
        let mut p = TreePriorConfig::default();
        assert!((p.sigma_mu() - 3.0 / (2.0 * 50f64.sqrt())).abs() < 1e-15);
        p.b = 1;
        p.r = 3.0;
        assert_eq!(p.sigma_mu(), 1.0);
    }

    #[test]
    fn stump_prior() {
        let p = TreePriorConfig::default();
        assert!((log_structure_prior(&Tree::stump(0.0), &p) - 0.05f64.ln()).abs() < 1e-12);
        assert!((0.05f64.ln() + 2.9957).abs() < 1e-4);
    }

    #[test]
    fn root_split_prior() {
        let p = TreePriorConfig::default();
        let t = Tree::stump(0.0).grow(0, SplitRule { var: 0, cut: 0.0 }).unwrap();
        let v = log_structure_prior(&t, &p);
        assert!((v - (0.95f64.ln() + 2.0 * (1.0 - 0.95 / 4.0f64).ln())).abs() < 1e-12);
        assert!((v + 0.5935).abs() < 1e-4, "{v}");
    }

    #[test]
    fn chain_matches_recursive_oracle() {
        let p = TreePriorConfig::default();
        let t = Tree::stump(0.0).grow(0, SplitRule { var: 0, cut: 0.0 }).unwrap();
        let (l, _) = t.children(0).unwrap();
        let t = t.grow(l, SplitRule { var: 1, cut: 0.0 }).unwrap();
        assert_eq!(t.n_leaves(), 3);
        let want = recursive_oracle(&t, 0, 0, 0.95, 2.0);
        assert!((log_structure_prior(&t, &p) - want).abs() < 1e-12);
    }

    #[test]
    fn alpha_one_forbids_stumps() {
        let p = TreePriorConfig { alpha: 1.0, ..Default::default() };
        assert_eq!(log_structure_prior(&Tree::stump(0.0), &p), f64::NEG_INFINITY);
        assert!(TreePriorConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(p.validate().is_ok());
    }
}
