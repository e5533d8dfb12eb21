//! Reference computations written independently of the `mlcbart` internals:
//! dense linear algebra, brute-force quadrature and scalar closed forms.
//! The acceptance run checks the library against these.

use std::f64::consts::PI;

use mlcbart::stats::CorrelationMatrix;
use mlcbart::RngStream;
use nalgebra::DMatrix;

/// A random correlation matrix from a normalized Wishart-like product.
pub fn random_correlation(q: usize, rng: &mut RngStream) -> CorrelationMatrix {
    let a = DMatrix::from_fn(q, q + 2, |_, _| rng.standard_normal());
    let s = &a * a.transpose();
    let d = s.diagonal().map(f64::sqrt);
    CorrelationMatrix::new(DMatrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { s[(i, j)] / (d[i] * d[j]) }))
        .expect("valid correlation")
}

/// Mean and variance of `Z_k | Z_{-k}` for `Z ~ MVN(g, R)`, by explicit
/// inversion of the `(q-1)×(q-1)` block.
pub fn dense_conditional(r: &CorrelationMatrix, g: &[f64], z: &[f64], k: usize) -> (f64, f64) {
    let q = r.dim();
    let others: Vec<usize> = (0..q).filter(|&l| l != k).collect();
    let sub = DMatrix::from_fn(q - 1, q - 1, |a, b| r.get(others[a], others[b]));
    let inv = sub.try_inverse().expect("invertible block");
    let row = DMatrix::from_fn(1, q - 1, |_, a| r.get(k, others[a]));
    let dev = DMatrix::from_fn(q - 1, 1, |a, _| z[others[a]] - g[others[a]]);
    let m = g[k] + (&row * &inv * dev)[(0, 0)];
    let phi = r.get(k, k) - (&row * &inv * row.transpose())[(0, 0)];
    (m, phi)
}

/// `log ∫ Πᵢ N(rᵢ; μ, φ) N(μ; 0, s2) dμ` by Simpson's rule.
pub fn leaf_loglik_quadrature(r: &[f64], phi: f64, s2: f64) -> f64 {
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

/// `P(Z₁ > 0, Z₂ > 0)` for a standard bivariate normal with correlation `rho`.
pub fn bivariate_positive_quadrant(rho: f64) -> f64 {
    0.25 + rho.asin() / (2.0 * PI)
}

/// Inverse-Wishart log kernel for 2×2 matrices stored as `(a11, a12, a22)`,
/// keeping the `df/2 · ln|scale|` term and dropping the rest of the normalizer.
pub fn iw_kernel_2x2(s: [f64; 3], df: f64, scale: [f64; 3]) -> f64 {
    let det = s[0] * s[2] - s[1] * s[1];
    let det_scale = scale[0] * scale[2] - scale[1] * scale[1];
    let tr = (scale[0] * s[2] - 2.0 * scale[1] * s[1] + scale[2] * s[0]) / det;
    0.5 * df * det_scale.ln() - 0.5 * (df + 3.0) * det.ln() - 0.5 * tr
}

/// Bivariate normal log likelihood of residuals `z - g` with unit variances.
pub fn bivariate_loglik(z: &[[f64; 2]], g: &[[f64; 2]], rho: f64) -> f64 {
    z.iter()
        .zip(g)
        .map(|(zi, gi)| {
            let (e1, e2) = (zi[0] - gi[0], zi[1] - gi[1]);
            -(2.0 * PI).ln() - 0.5 * (1.0 - rho * rho).ln()
                - (e1 * e1 - 2.0 * rho * e1 * e2 + e2 * e2) / (2.0 * (1.0 - rho * rho))
        })
        .sum()
}
