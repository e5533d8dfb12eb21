//! Inverse-Wishart sampling and (unnormalized) log density.

use nalgebra::DMatrix;
use rand_distr::ChiSquared;

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

pub(crate) fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!("{what} is not square")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite(format!("{what} has non-finite entries")));
    }
    m.clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// Draw `Σ ~ IW(df, scale)`, i.e. `Σ⁻¹ ~ Wishart(df, scale⁻¹)`.
///
/// Uses the Bartlett decomposition of the Wishart draw of the inverse scale.
pub fn sample_inverse_wishart(df: f64, scale: &DMatrix<f64>, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    let q = scale.nrows();
    if !(df > q as f64 - 1.0) {
        return Err(invalid(format!("inverse-Wishart needs df > q - 1 (df = {df}, q = {q})")));
    }
    let scale_inv = cholesky(scale, "inverse-Wishart scale")?.inverse();
    let l = cholesky(&scale_inv, "inverse of inverse-Wishart scale")?.unpack();

    let mut a = DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| invalid(e.to_string()))?;
        a[(i, i)] = rng.sample::<f64, _>(chi).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.standard_normal();
        }
    }
    let la = &l * &a;
    let wishart = &la * la.transpose();
    let mut sigma = cholesky(&wishart, "Wishart draw")?.inverse();
    symmetrize(&mut sigma);
    Ok(sigma)
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Log density of `IW(df, scale)` at `sigma`, dropping only the terms that
/// depend on `(df, q)` alone (multivariate gamma and powers of two):
///
/// `df/2·log|S| − (df+q+1)/2·log|Σ| − ½·tr(S Σ⁻¹)`.
///
/// The `log|S|` term is kept because proposal densities with different scales
/// are compared against each other.
pub fn log_inverse_wishart_density(sigma: &DMatrix<f64>, df: f64, scale: &DMatrix<f64>) -> Result<f64> {
    let q = sigma.nrows() as f64;
    if scale.nrows() != sigma.nrows() {
        return Err(Error::DimensionMismatch("inverse-Wishart scale vs argument".into()));
    }
    let chol_sigma = cholesky(sigma, "inverse-Wishart argument")?;
    let chol_scale = cholesky(scale, "inverse-Wishart scale")?;
    let logdet_sigma = 2.0 * chol_sigma.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let logdet_scale = 2.0 * chol_scale.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace = (scale * chol_sigma.inverse()).trace();
    Ok(0.5 * df * logdet_scale - 0.5 * (df + q + 1.0) * logdet_sigma - 0.5 * trace)
}
