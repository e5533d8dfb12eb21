//! Posterior predictive label-combination distributions and the decisions
//! derived from them.
//!
//! Patterns are indexed with label 1 as the most significant bit, so
//! index order is lexicographic order of the label vectors.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::sampler::{Mode, PosteriorDraws};

pub const DEFAULT_REALIZATIONS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionConfig {
    /// Latent realizations sampled per kept draw.
    pub c: usize,
    pub seed: u64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            c: DEFAULT_REALIZATIONS,
            seed: 0,
        }
    }
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c == 0 {
            return Err(invalid("c must be at least 1"));
        }
        Ok(())
    }
}

pub fn pattern_bits(index: usize, q: usize) -> Vec<u8> {
    (0..q).map(|k| ((index >> (q - 1 - k)) & 1) as u8).collect()
}

pub fn pattern_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b != 0))
}

pub fn pattern_string(index: usize, q: usize) -> String {
    pattern_bits(index, q).iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
}

/// Parse `"101"` into `(q, index)`.
pub fn parse_pattern(s: &str) -> Result<(usize, usize)> {
    let s = s.trim();
    if s.is_empty() || s.len() > 30 {
        return Err(invalid(format!("bad label pattern '{s}'")));
    }
    let mut bits = Vec::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '0' => bits.push(0),
            '1' => bits.push(1),
            _ => return Err(invalid(format!("bad label pattern '{s}'"))),
        }
    }
    Ok((bits.len(), pattern_index(&bits)))
}

/// Probabilities over all `2^q` label combinations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelCombinationDistribution {
    n_labels: usize,
    probabilities: Vec<f64>,
}

impl LabelCombinationDistribution {
    pub fn new(n_labels: usize, probabilities: Vec<f64>) -> Result<Self> {
        if n_labels == 0 || n_labels > 20 {
            return Err(invalid(format!("unsupported label count {n_labels}")));
        }
        if probabilities.len() != 1 << n_labels {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for {n_labels} labels",
                probabilities.len()
            )));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("probabilities must be finite and non-negative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            n_labels,
            probabilities,
        })
    }

    pub fn from_counts(n_labels: usize, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(invalid("no samples"));
        }
        Self::new(n_labels, counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn point_mass(n_labels: usize, index: usize) -> Result<Self> {
        let mut p = vec![0.0; 1 << n_labels];
        *p.get_mut(index).ok_or_else(|| invalid("pattern index out of range"))? = 1.0;
        Self::new(n_labels, p)
    }

    pub fn uniform(n_labels: usize) -> Result<Self> {
        let n = 1usize << n_labels;
        Self::new(n_labels, vec![1.0 / n as f64; n])
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn n_patterns(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.probabilities[index]
    }

    /// The `k` most probable patterns, ties in favour of the smaller index.
    pub fn top(&self, k: usize) -> Vec<(usize, f64)> {
        let mut order: Vec<usize> = (0..self.probabilities.len()).collect();
        order.sort_by(|&a, &b| self.probabilities[b].total_cmp(&self.probabilities[a]).then(a.cmp(&b)));
        order.into_iter().take(k).map(|i| (i, self.probabilities[i])).collect()
    }
}

pub fn hard_classify(dist: &LabelCombinationDistribution) -> usize {
    dist.top(1)[0].0
}

/// `P(y_k = 1)` for each label.
pub fn marginal_probabilities(dist: &LabelCombinationDistribution) -> Vec<f64> {
    let q = dist.n_labels;
    let mut m = vec![0.0; q];
    for (idx, p) in dist.probabilities.iter().enumerate() {
        for (k, mk) in m.iter_mut().enumerate() {
            if (idx >> (q - 1 - k)) & 1 == 1 {
                *mk += p;
            }
        }
    }
    m.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Joint distribution of independent labels with the given marginals.
pub fn product_joint(marginals: &[f64]) -> Result<LabelCombinationDistribution> {
    if marginals.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("marginal probabilities must lie in [0, 1]"));
    }
    let q = marginals.len();
    let probs = (0..1usize << q)
        .map(|idx| {
            marginals
                .iter()
                .enumerate()
                .map(|(k, p)| if (idx >> (q - 1 - k)) & 1 == 1 { *p } else { 1.0 - p })
                .product()
        })
        .collect();
    LabelCombinationDistribution::new(q, probs)
}

/// Linear-interpolation sample quantile (type 7) of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed intervals per label from per-draw marginal probabilities
/// (`L×q`).
pub fn credible_interval(per_draw_marginals: &DMatrix<f64>, level: f64) -> Result<Vec<(f64, f64)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("level must lie in (0, 1), got {level}")));
    }
    if per_draw_marginals.nrows() < 2 {
        return Err(invalid("credible intervals need at least two draws"));
    }
    let tail = (1.0 - level) / 2.0;
    Ok(per_draw_marginals
        .column_iter()
        .map(|col| {
            let mut v: Vec<f64> = col.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            let lo = quantile_sorted(&v, tail).clamp(0.0, 1.0);
            let hi = quantile_sorted(&v, 1.0 - tail).clamp(lo, 1.0);
            (lo, hi)
        })
        .collect())
}

/// Full `2^q × 2^q` loss table indexed `[predicted][observed]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTable {
    n_labels: usize,
    values: Vec<f64>,
}

impl LossTable {
    pub fn from_fn(n_labels: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let n = 1usize << n_labels;
        let mut values = Vec::with_capacity(n * n);
        for pred in 0..n {
            for obs in 0..n {
                let v = f(pred, obs);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid(format!("loss must be finite and non-negative, got {v}")));
                }
                values.push(v);
            }
        }
        Ok(Self { n_labels, values })
    }

    /// Read a long-format CSV with columns `predicted,observed,loss`, patterns
    /// written as bit strings. Every off-diagonal pair must be present;
    /// missing diagonal entries default to 0.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        let mut q = None;
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |message: String| Error::Data {
                path: path.display().to_string(),
                row: line + 1,
                column: String::new(),
                message,
            };
            if rec.len() != 3 {
                return Err(bad("expected predicted,observed,loss".into()));
            }
            let (qp, p) = parse_pattern(&rec[0]).map_err(|e| bad(e.to_string()))?;
            let (qo, o) = parse_pattern(&rec[1]).map_err(|e| bad(e.to_string()))?;
            let v: f64 = rec[2].trim().parse().map_err(|_| bad(format!("bad loss '{}'", &rec[2])))?;
            if qp != qo || q.is_some_and(|q| q != qp) {
                return Err(bad("inconsistent pattern lengths".into()));
            }
            q = Some(qp);
            entries.push((p, o, v));
        }
        let q = q.ok_or_else(|| invalid(format!("{}: empty loss table", path.display())))?;
        let n = 1usize << q;
        let mut values = vec![f64::NAN; n * n];
        for (p, o, v) in entries {
            values[p * n + o] = v;
        }
        for p in 0..n {
            if values[p * n + p].is_nan() {
                values[p * n + p] = 0.0;
            }
        }
        Self::from_fn(q, |p, o| values[p * n + o]).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m} (every pair must be listed)", path.display())),
            other => other,
        })
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LossSpec {
    ZeroOne,
    Hamming,
    Table(LossTable),
}

impl LossSpec {
    pub fn loss(&self, predicted: usize, observed: usize) -> f64 {
        match self {
            LossSpec::ZeroOne => f64::from(u8::from(predicted != observed)),
            LossSpec::Hamming => (predicted ^ observed).count_ones() as f64,
            LossSpec::Table(t) => t.values[predicted * (1 << t.n_labels) + observed],
        }
    }
}

/// Pattern minimizing posterior expected loss, ties to the smaller index.
pub fn expected_loss_decision(dist: &LabelCombinationDistribution, loss: &LossSpec) -> Result<usize> {
    if let LossSpec::Table(t) = loss {
        if t.n_labels != dist.n_labels {
            return Err(Error::DimensionMismatch(format!(
                "loss table is for {} labels, distribution has {}",
                t.n_labels, dist.n_labels
            )));
        }
    }
    let mut best = (0, f64::INFINITY);
    for cand in 0..dist.n_patterns() {
        let risk: f64 = dist
            .probabilities
            .iter()
            .enumerate()
            .map(|(obs, p)| p * loss.loss(cand, obs))
            .sum();
        if risk < best.1 {
            best = (cand, risk);
        }
    }
    Ok(best.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstancePrediction {
    pub distribution: LabelCombinationDistribution,
    /// `L×q` within-draw frequencies of `y_k = 1`.
    pub per_draw_marginals: DMatrix<f64>,
}

impl InstancePrediction {
    pub fn marginals(&self) -> Vec<f64> {
        marginal_probabilities(&self.distribution)
    }
}

/// Core sampler shared by all entry points. `means[l]` is `G(x0)` under
/// draw `l`.
fn sample_instance(draws: &PosteriorDraws, means: &[DVector<f64>], c: usize, rng: &mut RngStream) -> Result<InstancePrediction> {
    let q = draws.n_labels;
    let l_count = draws.draws.len();
    let mut counts = vec![0u64; 1 << q];
    let mut per_draw = DMatrix::zeros(l_count, q);
    let mut e = vec![0.0; q];
    for (l, draw) in draws.draws.iter().enumerate() {
        let chol = draw.r.cholesky_lower();
        let g = &means[l];
        for _ in 0..c {
            for v in e.iter_mut() {
                *v = rng.standard_normal();
            }
            // e ← L·u, computed in place from the last row upward
            for i in (0..q).rev() {
                e[i] = (0..=i).map(|j| chol[(i, j)] * e[j]).sum();
            }
            let mut idx = 0usize;
            for k in 0..q {
                let on = g[k] + e[k] > 0.0;
                idx = (idx << 1) | usize::from(on);
                if on {
                    per_draw[(l, k)] += 1.0;
                }
            }
            counts[idx] += 1;
        }
    }
    per_draw /= c as f64;
    Ok(InstancePrediction {
        distribution: LabelCombinationDistribution::from_counts(q, &counts)?,
        per_draw_marginals: per_draw,
    })
}

/// Frequencies of thresholded `Z = G(x0) + ε`, `ε ~ MVN(0, R)`, over `c`
/// realizations per kept draw, together with per-draw marginals.
pub fn predict_instance(draws: &PosteriorDraws, x0: &[f64], cfg: &PredictionConfig, rng: &mut RngStream) -> Result<InstancePrediction> {
    cfg.validate()?;
    if draws.is_empty() {
        return Err(invalid("no posterior draws"));
    }
    let means = (0..draws.len())
        .map(|l| draws.latent_mean(l, x0).map(DVector::from_vec))
        .collect::<Result<Vec<_>>>()?;
    sample_instance(draws, &means, cfg.c, rng)
}

pub fn posterior_predictive(
    draws: &PosteriorDraws,
    x0: &[f64],
    cfg: &PredictionConfig,
    rng: &mut RngStream,
) -> Result<LabelCombinationDistribution> {
    Ok(predict_instance(draws, x0, cfg, rng)?.distribution)
}

/// Predict every row of `x`. Row `i` uses the sub-stream
/// `RngStream::new(cfg.seed).split(i)`, so results do not depend on
/// scheduling.
pub fn predict_dataset(draws: &PosteriorDraws, x: &DMatrix<f64>, cfg: &PredictionConfig) -> Result<Vec<InstancePrediction>> {
    cfg.validate()?;
    if draws.is_empty() {
        return Err(invalid("no posterior draws"));
    }
    let g: Vec<DMatrix<f64>> = (0..draws.len())
        .map(|l| draws.latent_mean_matrix(l, x))
        .collect::<Result<_>>()?;
    let root = RngStream::new(cfg.seed);
    (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let means: Vec<DVector<f64>> = g.iter().map(|m| m.row(i).transpose()).collect();
            let mut rng = root.split(i as u64);
            sample_instance(draws, &means, cfg.c, &mut rng)
        })
        .collect()
}

/// Stack hard decisions into an `N×q` label matrix.
pub fn decisions_to_matrix(patterns: &[usize], q: usize) -> DMatrix<u8> {
    let mut m = DMatrix::zeros(patterns.len(), q);
    for (i, &p) in patterns.iter().enumerate() {
        for (k, b) in pattern_bits(p, q).into_iter().enumerate() {
            m[(i, k)] = b;
        }
    }
    m
}

/// The label-combination distribution a fitted model reports. Models with
/// `R` fixed to the identity report the product of their marginals.
pub fn label_distribution(draws: &PosteriorDraws, pred: &InstancePrediction) -> Result<LabelCombinationDistribution> {
    match draws.config.mode {
        Mode::Multivariate => Ok(pred.distribution.clone()),
        Mode::FixedIdentityR => product_joint(&pred.marginals()),
    }
}
