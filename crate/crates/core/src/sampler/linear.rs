//! Linear-mean probit baselines: `Z_i = Bᵀ h(x_i) + ε_i`, `ε_i ~ MVN(0, R)`,
//! with a `N(0, τ² I)` prior on the coefficients.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::stats::CorrelationMatrix;

/// One column of the design matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "term")]
pub enum BasisTerm {
    Intercept,
    Raw { var: usize },
    /// `sin(π · x_a · x_b)`
    SinProduct { a: usize, b: usize },
}

impl BasisTerm {
    fn eval(&self, x: impl Fn(usize) -> f64) -> f64 {
        match *self {
            BasisTerm::Intercept => 1.0,
            BasisTerm::Raw { var } => x(var),
            BasisTerm::SinProduct { a, b } => (PI * x(a) * x(b)).sin(),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match *self {
            BasisTerm::Intercept => None,
            BasisTerm::Raw { var } => Some(var),
            BasisTerm::SinProduct { a, b } => Some(a.max(b)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBasisSpec {
    pub terms: Vec<BasisTerm>,
    pub tau2: f64,
}

impl LinearBasisSpec {
    /// Intercept plus every predictor.
    pub fn raw(p: usize) -> Self {
        let mut terms = vec![BasisTerm::Intercept];
        terms.extend((0..p).map(|var| BasisTerm::Raw { var }));
        Self { terms, tau2: 100.0 }
    }

    /// Intercept, `sin(π x₁ x₂)` and `x₃`: the generating mean structure of
    /// the built-in simulation.
    pub fn oracle() -> Self {
        Self {
            terms: vec![
                BasisTerm::Intercept,
                BasisTerm::SinProduct { a: 0, b: 1 },
                BasisTerm::Raw { var: 2 },
            ],
            tau2: 100.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(invalid("linear basis has no terms"));
        }
        if !(self.tau2 > 0.0) {
            return Err(invalid("coefficient prior variance must be positive"));
        }
        Ok(())
    }

    pub fn required_features(&self) -> usize {
        self.terms.iter().filter_map(BasisTerm::max_var).max().map_or(0, |v| v + 1)
    }

    pub fn row(&self, x: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|t| t.eval(|v| x[v])).collect()
    }

    pub fn design(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() < self.required_features() {
            return Err(Error::DimensionMismatch(format!(
                "basis needs {} predictors, data has {}",
                self.required_features(),
                x.ncols()
            )));
        }
        Ok(DMatrix::from_fn(x.nrows(), self.dim(), |i, a| self.terms[a].eval(|v| x[(i, v)])))
    }
}

/// Fails when `HᵀH` is numerically singular.
pub fn check_full_rank(design: &DMatrix<f64>) -> Result<()> {
    if design.nrows() == 0 {
        return Ok(());
    }
    let gram = design.transpose() * design;
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let rank = gram.clone().symmetric_eigenvalues().iter().filter(|&&e| e > 1e-10 * scale).count();
    if rank < design.ncols() {
        return Err(invalid(format!("design matrix has rank {rank} < {} columns", design.ncols())));
    }
    Ok(())
}

/// Conjugate draw of the `d×q` coefficient matrix given latents `z` (N×q),
/// correlation `r` and prior variance `tau2`.
///
/// The precision of `vec(B)` (label-major) is `R⁻¹ ⊗ HᵀH + I/τ²`.
pub fn draw_linear_coefficients(
    design: &DMatrix<f64>,
    z: &DMatrix<f64>,
    r: &CorrelationMatrix,
    tau2: f64,
    rng: &mut RngStream,
) -> Result<DMatrix<f64>> {
    let (n, d, q) = (design.nrows(), design.ncols(), r.dim());
    if z.nrows() != n || z.ncols() != q {
        return Err(Error::DimensionMismatch("latent matrix vs design/correlation".into()));
    }
    if !(tau2 > 0.0) {
        return Err(invalid("coefficient prior variance must be positive"));
    }
    check_full_rank(design)?;
    let r_inv = r
        .matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("R".into()))?
        .inverse();
    let gram = design.transpose() * design;
    let hz = design.transpose() * z;
    let m = d * q;
    let mut precision = DMatrix::zeros(m, m);
    let mut rhs = DMatrix::zeros(m, 1);
    for k in 0..q {
        for l in 0..q {
            let w = r_inv[(k, l)];
            for a in 0..d {
                for c in 0..d {
                    precision[(k * d + a, l * d + c)] = w * gram[(a, c)];
                }
                rhs[(k * d + a, 0)] += w * hz[(a, l)];
            }
        }
        for a in 0..d {
            precision[(k * d + a, k * d + a)] += 1.0 / tau2;
        }
    }
    let chol = precision
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("coefficient posterior precision".into()))?;
    let mean = chol.solve(&rhs);
    let u = DMatrix::from_fn(m, 1, |_, _| rng.standard_normal());
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&u)
        .ok_or_else(|| Error::NotPositiveDefinite("coefficient posterior factor".into()))?;
    let beta = mean + noise;
    Ok(DMatrix::from_fn(d, q, |a, k| beta[(k * d + a, 0)]))
}
