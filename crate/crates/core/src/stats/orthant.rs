//! Monte Carlo orthant probabilities of a multivariate normal.
//!
//! Samples are `mean ± L u` antithetic pairs with `R = L Lᵀ`; the standard
//! error is computed from pair averages. Sampling stops once the relevant
//! standard error reaches the target or [`MAX_SAMPLES`] draws are used.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::correlation::CorrelationMatrix;
use crate::stats::normal::Side;

pub const DEFAULT_TARGET_SE: f64 = 1e-3;
pub const MAX_SAMPLES: usize = 1 << 17;
const FIRST_CHECK_PAIRS: usize = 1 << 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrthantEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Pattern index with label 1 as the most significant bit.
pub fn pattern_index_of(z: &[f64]) -> usize {
    z.iter().fold(0, |acc, &v| (acc << 1) | usize::from(v > 0.0))
}

struct PairAccumulator {
    sums: Vec<f64>,
    sumsq: Vec<f64>,
    pairs: usize,
}

impl PairAccumulator {
    fn estimate(&self, p: usize) -> OrthantEstimate {
        let n = self.pairs as f64;
        let mean = self.sums[p] / n;
        let var = ((self.sumsq[p] - n * mean * mean) / (n - 1.0)).max(0.0);
        OrthantEstimate {
            probability: mean.clamp(0.0, 1.0),
            std_error: (var / n).sqrt(),
            samples: 2 * self.pairs,
        }
    }
}

fn run_pairs<F>(mean: &[f64], r: &CorrelationMatrix, rng: &mut RngStream, mut done: F) -> Result<PairAccumulator>
where
    F: FnMut(&PairAccumulator) -> bool,
{
    let q = r.dim();
    if mean.len() != q {
        return Err(Error::DimensionMismatch(format!("orthant mean has {} entries, R is {q}x{q}", mean.len())));
    }
    let l = r.cholesky_lower();
    let mut acc = PairAccumulator {
        sums: vec![0.0; 1 << q],
        sumsq: vec![0.0; 1 << q],
        pairs: 0,
    };
    let mut u = vec![0.0; q];
    let mut plus = vec![0.0; q];
    let mut minus = vec![0.0; q];
    let mut next_check = FIRST_CHECK_PAIRS;
    loop {
        for v in u.iter_mut() {
            *v = rng.standard_normal();
        }
        for i in 0..q {
            let mut s = 0.0;
            for j in 0..=i {
                s += l[(i, j)] * u[j];
            }
            plus[i] = mean[i] + s;
            minus[i] = mean[i] - s;
        }
        let a = pattern_index_of(&plus);
        let b = pattern_index_of(&minus);
        if a == b {
            acc.sums[a] += 1.0;
            acc.sumsq[a] += 1.0;
        } else {
            acc.sums[a] += 0.5;
            acc.sumsq[a] += 0.25;
            acc.sums[b] += 0.5;
            acc.sumsq[b] += 0.25;
        }
        acc.pairs += 1;
        if acc.pairs == next_check {
            if 2 * acc.pairs >= MAX_SAMPLES || done(&acc) {
                return Ok(acc);
            }
            next_check *= 2;
        }
    }
}

/// `P(sign(Z_k) = sides_k for all k)` for `Z ~ MVN(mean, R)`.
pub fn orthant_probability(
    mean: &[f64],
    r: &CorrelationMatrix,
    sides: &[Side],
    target_se: f64,
    rng: &mut RngStream,
) -> Result<OrthantEstimate> {
    if sides.len() != r.dim() {
        return Err(Error::DimensionMismatch("orthant sign pattern length".into()));
    }
    let pattern = sides
        .iter()
        .fold(0, |acc, s| (acc << 1) | usize::from(*s == Side::Positive));
    let acc = run_pairs(mean, r, rng, |acc| acc.estimate(pattern).std_error <= target_se)?;
    Ok(acc.estimate(pattern))
}

/// Estimates for all `2^q` sign patterns from one shared set of samples.
/// Stops once every pattern's standard error is at most `target_se`.
pub fn orthant_distribution(
    mean: &[f64],
    r: &CorrelationMatrix,
    target_se: f64,
    rng: &mut RngStream,
) -> Result<Vec<OrthantEstimate>> {
    let q = r.dim();
    let acc = run_pairs(mean, r, rng, |acc| {
        (0..1 << q).all(|p| acc.estimate(p).std_error <= target_se)
    })?;
    Ok((0..1 << q).map(|p| acc.estimate(p)).collect())
}
