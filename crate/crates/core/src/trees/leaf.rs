//! Conjugate normal-normal mathematics for terminal nodes: residuals
//! `r ~ N(μ, φ)` with `μ ~ N(0, σ_μ²)`.

use std::f64::consts::PI;

use super::tree::{LeafRows, Tree};
use crate::error::{invalid, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LeafStats {
    pub n: usize,
    pub sum: f64,
    pub sumsq: f64,
}

impl LeafStats {
    pub fn from_residuals(residuals: &[f64], rows: &[usize]) -> Self {
        let mut s = LeafStats { n: rows.len(), ..Default::default() };
        for &i in rows {
            s.sum += residuals[i];
            s.sumsq += residuals[i] * residuals[i];
        }
        s
    }

    /// Stats for every node of `tree` (zero for internal nodes).
    pub fn per_node(rows: &LeafRows, residuals: &[f64]) -> Vec<LeafStats> {
        rows.rows.iter().map(|r| LeafStats::from_residuals(residuals, r)).collect()
    }
}

fn check_variances(phi: f64, sigma_mu2: f64) -> Result<()> {
    if !(phi > 0.0) || !(sigma_mu2 > 0.0) {
        return Err(invalid(format!("leaf variances must be positive (phi = {phi}, sigma_mu2 = {sigma_mu2})")));
    }
    Ok(())
}

/// `log ∫ Πᵢ N(rᵢ; μ, φ) N(μ; 0, σ_μ²) dμ` in closed form.
pub fn leaf_marginal_loglik(stats: LeafStats, phi: f64, sigma_mu2: f64) -> Result<f64> {
    check_variances(phi, sigma_mu2)?;
    if stats.n == 0 {
        return Ok(0.0);
    }
    let n = stats.n as f64;
    let denom = phi + n * sigma_mu2;
    Ok(-0.5 * n * (2.0 * PI * phi).ln() + 0.5 * (phi / denom).ln() - stats.sumsq / (2.0 * phi)
        + sigma_mu2 * stats.sum * stats.sum / (2.0 * phi * denom))
}

/// Posterior `N(V·Σr/φ, V)` with `V = (n/φ + 1/σ_μ²)⁻¹`.
pub fn leaf_posterior(stats: LeafStats, phi: f64, sigma_mu2: f64) -> (f64, f64) {
    let v = 1.0 / (stats.n as f64 / phi + 1.0 / sigma_mu2);
    (v * stats.sum / phi, v)
}

/// Redraw every leaf value of `tree` from its conditional posterior.
/// `stats` is indexed by node id.
pub fn draw_leaf_values(
    tree: &Tree,
    stats: &[LeafStats],
    phi: f64,
    sigma_mu2: f64,
    rng: &mut RngStream,
) -> Result<Tree> {
    check_variances(phi, sigma_mu2)?;
    let mut out = tree.clone();
    for id in tree.leaves() {
        let (mean, var) = leaf_posterior(stats[id], phi, sigma_mu2);
        out.set_leaf_value(id, mean + var.sqrt() * rng.standard_normal());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_of(r: &[f64]) -> LeafStats {
        LeafStats::from_residuals(r, &(0..r.len()).collect::<Vec<_>>())
    }

    /// Simpson's rule over μ of the unnormalized integrand.
    fn quadrature(r: &[f64], phi: f64, s2: f64) -> f64 {
        let n = 200_000;
        let (lo, hi) = (-12.0 * s2.sqrt() - 5.0, 12.0 * s2.sqrt() + 5.0);
        let h = (hi - lo) / n as f64;
        let f = |mu: f64| {
            let mut l = (-(mu * mu) / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt();
            for &x in r {
                l *= (-(x - mu) * (x - mu) / (2.0 * phi)).exp() / (2.0 * PI * phi).sqrt();
            }
            l
        };
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        (acc * h / 3.0).ln()
    }

    #[test]
    fn empty_leaf_is_zero() {
        assert_eq!(leaf_marginal_loglik(LeafStats::default(), 1.0, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn matches_quadrature() {
        let r = [0.1, -0.2, 0.3];
        let want = quadrature(&r, 1.0, 0.25);
        let got = leaf_marginal_loglik(stats_of(&r), 1.0, 0.25).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn matches_quadrature_randomized() {
        let mut rng = RngStream::new(8);
        for _ in 0..30 {
            let n = 1 + rng.index(10);
            let r: Vec<f64> = (0..n).map(|_| rng.standard_normal() * 1.5 + 0.3).collect();
            let phi = rng.uniform_range(0.2, 1.0);
            let s2 = rng.uniform_range(0.01, 1.0);
            let want = quadrature(&r, phi, s2);
            let got = leaf_marginal_loglik(stats_of(&r), phi, s2).unwrap();
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn point_mass_prior_limit() {
        let r = [0.4, -1.2, 0.7, 0.05];
        let want: f64 = r.iter().map(|x| -0.5 * (2.0 * PI).ln() - x * x / 2.0).sum();
        let got = leaf_marginal_loglik(stats_of(&r), 1.0, 1e-12).unwrap();
        assert!((got - want).abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_variance() {
        assert!(leaf_marginal_loglik(stats_of(&[1.0]), 0.0, 1.0).is_err());
        assert!(leaf_marginal_loglik(stats_of(&[1.0]), 1.0, -1.0).is_err());
    }

    #[test]
    fn posterior_moments() {
        let (m, v) = leaf_posterior(LeafStats { n: 4, sum: 2.0, sumsq: 0.0 }, 1.0, 1.0);
        assert!((m - 0.4).abs() < 1e-15 && (v - 0.2).abs() < 1e-15);
        let (m, v) = leaf_posterior(LeafStats::default(), 1.0, 0.3);
        assert_eq!((m, v), (0.0, 0.3));
    }

    #[test]
    fn draws_follow_posterior() {
        let mut rng = RngStream::new(1);
        let tree = Tree::stump(0.0);
        let stats = [LeafStats { n: 4, sum: 2.0, sumsq: 0.0 }];
        let draws: Vec<f64> = (0..50_000)
            .map(|_| draw_leaf_values(&tree, &stats, 1.0, 1.0, &mut rng).unwrap().traverse(&[]))
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.4).abs() < 0.01 && (var - 0.2).abs() < 0.01, "{mean} {var}");
    }

    #[test]
    fn draws_contract_with_many_rows() {
        let mut rng = RngStream::new(2);
        let n = 10_000;
        let stats = [LeafStats { n, sum: 0.7 * n as f64, sumsq: 0.0 }];
        let tree = Tree::stump(0.0);
        for _ in 0..100 {
            let v = draw_leaf_values(&tree, &stats, 1.0, 0.1, &mut rng).unwrap().traverse(&[]);
            assert!((v - 0.7).abs() < 5.0 * (1.0 / n as f64).sqrt());
        }
    }
}
