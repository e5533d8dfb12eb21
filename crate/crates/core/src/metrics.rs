//! Multilabel evaluation measures.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::predict::LabelCombinationDistribution;

/// Additive smoothing applied to the estimated distribution in
/// [`kl_divergence`].
pub const KL_SMOOTHING: f64 = 1e-6;

/// Predicted and observed label matrices of identical shape.
#[derive(Clone, Copy, Debug)]
pub struct LabelMatrixPair<'a> {
    predicted: &'a DMatrix<u8>,
    observed: &'a DMatrix<u8>,
}

impl<'a> LabelMatrixPair<'a> {
    pub fn new(predicted: &'a DMatrix<u8>, observed: &'a DMatrix<u8>) -> Result<Self> {
        if predicted.shape() != observed.shape() {
            return Err(Error::DimensionMismatch(format!(
                "predicted is {:?}, observed is {:?}",
                predicted.shape(),
                observed.shape()
            )));
        }
        if predicted.nrows() == 0 || predicted.ncols() == 0 {
            return Err(invalid("empty label matrices"));
        }
        if predicted.iter().chain(observed.iter()).any(|&v| v > 1) {
            return Err(invalid("label matrices must be 0/1"));
        }
        Ok(Self { predicted, observed })
    }

    fn confusion(&self, k: usize) -> (usize, usize, usize) {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (p, o) in self.predicted.column(k).iter().zip(self.observed.column(k).iter()) {
            match (p, o) {
                (1, 1) => tp += 1,
                (1, 0) => fp += 1,
                (0, 1) => fn_ += 1,
                _ => {}
            }
        }
        (tp, fp, fn_)
    }
}

pub fn subset_accuracy(pair: &LabelMatrixPair) -> f64 {
    let n = pair.predicted.nrows();
    let hits = (0..n).filter(|&i| pair.predicted.row(i) == pair.observed.row(i)).count();
    hits as f64 / n as f64
}

pub fn hamming_loss(pair: &LabelMatrixPair) -> f64 {
    let wrong = pair.predicted.iter().zip(pair.observed.iter()).filter(|(p, o)| p != o).count();
    wrong as f64 / pair.predicted.len() as f64
}

// A label with no positives anywhere scores 1; a zero denominator otherwise scores 0.
fn per_label(tp: usize, fp: usize, fn_: usize, num: usize, den: usize) -> f64 {
    if tp + fp + fn_ == 0 {
        1.0
    } else if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn macro_precision(pair: &LabelMatrixPair) -> f64 {
    let q = pair.predicted.ncols();
    (0..q)
        .map(|k| {
            let (tp, fp, fn_) = pair.confusion(k);
            per_label(tp, fp, fn_, tp, tp + fp)
        })
        .sum::<f64>()
        / q as f64
}

pub fn macro_f1(pair: &LabelMatrixPair) -> f64 {
    let q = pair.predicted.ncols();
    (0..q)
        .map(|k| {
            let (tp, fp, fn_) = pair.confusion(k);
            per_label(tp, fp, fn_, 2 * tp, 2 * tp + fp + fn_)
        })
        .sum::<f64>()
        / q as f64
}

/// `KL(p_true ‖ p̃_est)` with `p̃_est = (p_est + ε)/(1 + Qε)`.
pub fn kl_divergence(p_true: &LabelCombinationDistribution, p_est: &LabelCombinationDistribution) -> Result<f64> {
    if p_true.n_labels() != p_est.n_labels() {
        return Err(Error::DimensionMismatch(format!(
            "distributions over {} and {} labels",
            p_true.n_labels(),
            p_est.n_labels()
        )));
    }
    if p_true.probabilities() == p_est.probabilities() {
        return Ok(0.0);
    }
    let norm = 1.0 + p_est.n_patterns() as f64 * KL_SMOOTHING;
    let kl: f64 = p_true
        .probabilities()
        .iter()
        .zip(p_est.probabilities())
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, e)| t * (t / ((e + KL_SMOOTHING) / norm)).ln())
        .sum();
    Ok(kl.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlSummary {
    pub mean: f64,
    pub median: f64,
}

pub fn mean_kl_over_testset(
    true_dists: &[LabelCombinationDistribution],
    est_dists: &[LabelCombinationDistribution],
) -> Result<KlSummary> {
    if true_dists.len() != est_dists.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true and {} estimated distributions",
            true_dists.len(),
            est_dists.len()
        )));
    }
    if true_dists.is_empty() {
        return Err(invalid("no distributions to compare"));
    }
    let mut kls = true_dists
        .iter()
        .zip(est_dists)
        .map(|(t, e)| kl_divergence(t, e))
        .collect::<Result<Vec<_>>>()?;
    let mean = kls.iter().sum::<f64>() / kls.len() as f64;
    kls.sort_by(f64::total_cmp);
    let n = kls.len();
    let median = if n % 2 == 1 {
        kls[n / 2]
    } else {
        0.5 * (kls[n / 2 - 1] + kls[n / 2])
    };
    Ok(KlSummary { mean, median })
}

/// The metric record written by `evaluate`. KL fields are `null` when no
/// true distributions are available.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub subset_accuracy: f64,
    pub hamming_loss: f64,
    pub macro_precision: f64,
    pub macro_f1: f64,
    pub mean_kl: Option<f64>,
    pub median_kl: Option<f64>,
}

impl MetricReport {
    pub fn compute(pair: &LabelMatrixPair, kl: Option<KlSummary>) -> Self {
        Self {
            subset_accuracy: subset_accuracy(pair),
            hamming_loss: hamming_loss(pair),
            macro_precision: macro_precision(pair),
            macro_f1: macro_f1(pair),
            mean_kl: kl.map(|s| s.mean),
            median_kl: kl.map(|s| s.median),
        }
    }
}
