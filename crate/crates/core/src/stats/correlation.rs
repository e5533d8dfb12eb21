//! Correlation matrices, the `(R, D)` scale decomposition, its prior, and the
//! conditional moments of one latent coordinate given the others.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::wishart::{cholesky, log_inverse_wishart_density};
use crate::error::{invalid, Error, Result};
use crate::linalg::{from_rows, log_det_from_cholesky, to_rows};

const UNIT_TOL: f64 = 1e-9;

/// Symmetric positive-definite matrix with unit diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CorrelationMatrix {
    matrix: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let q = matrix.nrows();
        if q == 0 || matrix.ncols() != q {
            return Err(Error::DimensionMismatch("correlation matrix must be square and non-empty".into()));
        }
        for i in 0..q {
            if (matrix[(i, i)] - 1.0).abs() > UNIT_TOL {
                return Err(invalid(format!("correlation diagonal entry {i} is {}", matrix[(i, i)])));
            }
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > UNIT_TOL {
                    return Err(invalid("correlation matrix is not symmetric"));
                }
            }
        }
        let chol = cholesky(&matrix, "correlation matrix")?.unpack();
        Ok(Self { matrix, chol })
    }

    pub fn identity(q: usize) -> Self {
        Self {
            matrix: DMatrix::identity(q, q),
            chol: DMatrix::identity(q, q),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(from_rows(rows)?)
    }

    /// Two-label matrix with off-diagonal `rho`.
    pub fn bivariate(rho: f64) -> Result<Self> {
        Self::from_rows(&[vec![1.0, rho], vec![rho, 1.0]])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower Cholesky factor `L` with `R = L Lᵀ`.
    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        log_det_from_cholesky(&self.chol)
    }

    pub fn is_identity(&self) -> bool {
        let q = self.dim();
        (0..q).all(|i| (0..q).all(|j| i == j || self.matrix[(i, j)] == 0.0))
    }

    /// Strict upper-triangle entries in row-major order: `r12, r13, …, r23, …`.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let q = self.dim();
        let mut out = Vec::with_capacity(q * (q - 1) / 2);
        for i in 0..q {
            for j in i + 1..q {
                out.push(self.matrix[(i, j)]);
            }
        }
        out
    }
}

impl TryFrom<Vec<Vec<f64>>> for CorrelationMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<CorrelationMatrix> for Vec<Vec<f64>> {
    fn from(r: CorrelationMatrix) -> Self {
        to_rows(&r.matrix)
    }
}

/// `Σ = D^{1/2} R D^{1/2}` with `D` held as its diagonal of variances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleDecomposition {
    pub r: CorrelationMatrix,
    pub d: Vec<f64>,
}

impl ScaleDecomposition {
    pub fn identity(q: usize) -> Self {
        Self {
            r: CorrelationMatrix::identity(q),
            d: vec![1.0; q],
        }
    }

    pub fn sigma(&self) -> DMatrix<f64> {
        let q = self.r.dim();
        DMatrix::from_fn(q, q, |i, j| self.r.get(i, j) * (self.d[i] * self.d[j]).sqrt())
    }

    pub fn log_det_d(&self) -> f64 {
        self.d.iter().map(|v| v.ln()).sum()
    }
}

/// Split an SPD covariance into its correlation matrix and variances.
pub fn decompose_to_correlation(sigma: &DMatrix<f64>) -> Result<ScaleDecomposition> {
    cholesky(sigma, "covariance to decompose")?;
    let q = sigma.nrows();
    let d: Vec<f64> = (0..q).map(|i| sigma[(i, i)]).collect();
    let mut r = DMatrix::from_fn(q, q, |i, j| sigma[(i, j)] / (d[i] * d[j]).sqrt());
    for i in 0..q {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(ScaleDecomposition {
        r: CorrelationMatrix::new(r)?,
        d,
    })
}

/// Inverse-Wishart prior on `Σ` plus the proposal degrees of freedom used by
/// the correlation Metropolis-Hastings step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPriorConfig {
    pub m0: f64,
    #[serde(with = "crate::linalg::rows")]
    pub sigma0: DMatrix<f64>,
    pub wp: f64,
}

impl CorrelationPriorConfig {
    /// `m0 = q + 2`, `Σ0 = I`, `w_p = 50`.
    pub fn default_for(q: usize) -> Self {
        Self {
            m0: q as f64 + 2.0,
            sigma0: DMatrix::identity(q, q),
            wp: 50.0,
        }
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        if !(self.m0 > q as f64 + 1.0) {
            return Err(invalid(format!("m0 must exceed q + 1 = {} (got {})", q + 1, self.m0)));
        }
        if !(self.wp > q as f64 - 1.0) {
            return Err(invalid(format!("w_p must exceed q - 1 = {} (got {})", q as f64 - 1.0, self.wp)));
        }
        if self.sigma0.nrows() != q || self.sigma0.ncols() != q {
            return Err(Error::DimensionMismatch(format!("Sigma0 must be {q}x{q}")));
        }
        cholesky(&self.sigma0, "Sigma0")?;
        Ok(())
    }
}

/// Unnormalized log density of `(R, D)` induced by `Σ ~ IW(m0, Σ0)`:
/// the inverse-Wishart log density at `D^{1/2} R D^{1/2}` plus the
/// change-of-variables term `((q−1)/2)·log|D|`.
///
/// Dropped constant: the multivariate-gamma normalizer, which depends on
/// `(m0, q)` only.
pub fn log_prior_rd(dec: &ScaleDecomposition, prior: &CorrelationPriorConfig) -> Result<f64> {
    let q = dec.r.dim() as f64;
    let iw = log_inverse_wishart_density(&dec.sigma(), prior.m0, &prior.sigma0)?;
    Ok(iw + 0.5 * (q - 1.0) * dec.log_det_d())
}

/// Regression weights `R_{k,−k} R_{−k,−k}⁻¹` and residual variances `φ_k`
/// for every label, computed once per correlation matrix.
#[derive(Clone, Debug)]
pub struct ConditionalWeights {
    /// `weights[k][l]` is the coefficient on coordinate `l`; zero at `l == k`.
    weights: Vec<Vec<f64>>,
    phi: Vec<f64>,
}

impl ConditionalWeights {
    pub fn new(r: &CorrelationMatrix) -> Result<Self> {
        let q = r.dim();
        let mut weights = Vec::with_capacity(q);
        let mut phi = Vec::with_capacity(q);
        for k in 0..q {
            let others: Vec<usize> = (0..q).filter(|&l| l != k).collect();
            let mut w = vec![0.0; q];
            if others.is_empty() {
                weights.push(w);
                phi.push(r.get(k, k));
                continue;
            }
            let sub = DMatrix::from_fn(others.len(), others.len(), |a, b| r.get(others[a], others[b]));
            let rhs = DMatrix::from_fn(others.len(), 1, |a, _| r.get(others[a], k));
            let solved = cholesky(&sub, "R_{-k,-k}")?.solve(&rhs);
            let mut explained = 0.0;
            for (a, &l) in others.iter().enumerate() {
                w[l] = solved[(a, 0)];
                explained += rhs[(a, 0)] * solved[(a, 0)];
            }
            let v = r.get(k, k) - explained;
            if !(v > 0.0) {
                return Err(Error::NotPositiveDefinite(format!("conditional variance of label {k} is {v}")));
            }
            weights.push(w);
            phi.push(v.min(1.0));
        }
        Ok(Self { weights, phi })
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    pub fn phi(&self, k: usize) -> f64 {
        self.phi[k]
    }

    /// `R_{k,−k} R_{−k,−k}⁻¹ (z_{−k} − g_{−k})`.
    pub fn correction(&self, k: usize, z: &[f64], g: &[f64]) -> f64 {
        self.weights[k]
            .iter()
            .zip(z.iter().zip(g))
            .map(|(w, (zl, gl))| w * (zl - gl))
            .sum()
    }
}

/// Conditional mean and variance of `z_k` given the other coordinates when
/// `z ~ MVN(g, R)`. `k` is zero-based.
pub fn conditional_normal_params(r: &CorrelationMatrix, g: &[f64], z: &[f64], k: usize) -> Result<(f64, f64)> {
    let q = r.dim();
    if k >= q {
        return Err(invalid(format!("label index {k} out of range for q = {q}")));
    }
    if g.len() != q || z.len() != q {
        return Err(Error::DimensionMismatch("conditional_normal_params vectors".into()));
    }
    let w = ConditionalWeights::new(r)?;
    Ok((g[k] + w.correction(k, z, g), w.phi(k)))
}
