//! Standard normal functions and one-sided truncated normal sampling.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{invalid, Result};
use crate::rng::RngStream;

/// Standardized truncation points beyond this magnitude switch from
/// inverse-CDF sampling to rejection sampling.
pub const INVERSE_CDF_LIMIT: f64 = 4.0;

/// Which side of zero a latent value must fall on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    pub fn from_label(y: u8) -> Self {
        if y == 1 {
            Side::Positive
        } else {
            Side::Negative
        }
    }

    pub fn contains(self, x: f64) -> bool {
        match self {
            Side::Positive => x > 0.0,
            Side::Negative => x < 0.0,
        }
    }
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

pub fn norm_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Standard normal draw conditioned on `x > a`.
fn standard_above(a: f64, rng: &mut RngStream) -> f64 {
    if a > INVERSE_CDF_LIMIT {
        // Exponential proposal with the optimal rate for the tail.
        let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
        loop {
            let x = a - rng.uniform().ln() / lambda;
            let d = x - lambda;
            if rng.uniform() <= (-0.5 * d * d).exp() {
                return x;
            }
        }
    } else if a < -INVERSE_CDF_LIMIT {
        // Almost all mass lies above `a`.
        loop {
            let x = rng.standard_normal();
            if x > a {
                return x;
            }
        }
    } else {
        // Invert the upper tail: P(X > x) = v with v uniform on (0, P(X > a)).
        let v = rng.uniform() * norm_sf(a);
        SQRT_2 * erfc_inv(2.0 * v)
    }
}

/// Draw from `N(mean, sd²)` restricted to one side of zero.
///
/// The returned value is strictly positive (resp. negative).
pub fn sample_truncated_normal(mean: f64, sd: f64, side: Side, rng: &mut RngStream) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(invalid(format!("truncated normal needs sd > 0, got {sd}")));
    }
    if !mean.is_finite() {
        return Err(invalid(format!("truncated normal needs a finite mean, got {mean}")));
    }
    let (m, sign) = match side {
        Side::Positive => (mean, 1.0),
        Side::Negative => (-mean, -1.0),
    };
    let a = -m / sd;
    loop {
        let v = m + sd * standard_above(a, rng);
        if v > 0.0 && v.is_finite() {
            return Ok(sign * v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empirical_mean(mean: f64, sd: f64, side: Side, n: usize, seed: u64) -> f64 {
        let mut rng = RngStream::new(seed);
        (0..n)
            .map(|_| sample_truncated_normal(mean, sd, side, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64
    }

    /// Mean of N(mu, 1) truncated to (0, inf) by trapezoidal quadrature.
    fn quadrature_truncated_mean(mu: f64) -> f64 {
        let (lo, hi, n) = (0.0, mu.max(0.0) + 12.0, 400_000);
        let h = (hi - lo) / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let f = (-(x - mu) * (x - mu) / 2.0).exp();
            num += w * x * f;
            den += w * f;
        }
        num / den
    }

    #[test]
    fn half_normal_mean() {
        let m = empirical_mean(0.0, 1.0, Side::Positive, 100_000, 1);
        assert!((m - (2.0 / PI).sqrt()).abs() < 0.01, "{m}");
    }

    #[test]
    fn negligible_truncation() {
        let m = empirical_mean(5.0, 1.0, Side::Positive, 100_000, 2);
        assert!((m - 5.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn far_tail_matches_quadrature() {
        let oracle = quadrature_truncated_mean(-10.0);
        assert!((oracle - 0.0981).abs() < 5e-4, "oracle {oracle}");
        let m = empirical_mean(-10.0, 1.0, Side::Positive, 100_000, 3);
        assert!((m - oracle).abs() < 0.005, "{m} vs {oracle}");
    }

    #[test]
    fn moderate_bound_matches_quadrature() {
        for mu in [-3.0, -1.0, 0.5, 2.0] {
            let oracle = quadrature_truncated_mean(mu);
            let m = empirical_mean(mu, 1.0, Side::Positive, 100_000, 4);
            assert!((m - oracle).abs() < 0.01, "mu={mu}: {m} vs {oracle}");
        }
    }

    #[test]
    fn negative_side_mirrors_positive() {
        let m = empirical_mean(0.0, 2.0, Side::Negative, 100_000, 5);
        assert!((m + 2.0 * (2.0 / PI).sqrt()).abs() < 0.02, "{m}");
    }

    #[test]
    fn rejects_bad_sd() {
        let mut rng = RngStream::new(0);
        assert!(sample_truncated_normal(0.0, 0.0, Side::Positive, &mut rng).is_err());
        assert!(sample_truncated_normal(0.0, -1.0, Side::Negative, &mut rng).is_err());
    }

    #[test]
    fn sign_constraint_over_extreme_bounds() {
        let mut rng = RngStream::new(6);
        for i in 0..1_000_000u32 {
            let bound = -40.0 + 80.0 * (i % 8001) as f64 / 8000.0;
            let side = if i % 2 == 0 { Side::Positive } else { Side::Negative };
            // bound is the standardized truncation point -mean/sd for sd = 1.
            let x = sample_truncated_normal(-bound, 1.0, side, &mut rng).unwrap();
            assert!(x.is_finite() && side.contains(x), "bound {bound} side {side:?} -> {x}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-10, 1e-4, 0.02, 0.5, 0.9, 0.999] {
            assert!((norm_cdf(norm_quantile(p)) - p).abs() <= 1e-9 * p, "{p}");
        }
        let tail = norm_sf(3.0);
        assert!((tail / 1.3498980316300933e-3 - 1.0).abs() < 1e-12, "{tail:e}");
    }
}
