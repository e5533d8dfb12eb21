//! Synthetic three-label data with a nonlinear, interacting mean structure
//! and strongly correlated latent noise.

mod experiment;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use experiment::{
    correlation_recovery_summary, run_experiment, CellResult, CorrelationSummary, ExperimentConfig, ExperimentResults,
    ModelKind, ScenarioModelSummary,
};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::predict::LabelCombinationDistribution;
use crate::rng::RngStream;
use crate::stats::{orthant_distribution, CorrelationMatrix};

/// The latent correlation used by every built-in scenario.
pub fn default_correlation() -> CorrelationMatrix {
    CorrelationMatrix::from_rows(&[vec![1.0, 0.7, 0.8], vec![0.7, 1.0, 0.9], vec![0.8, 0.9, 1.0]])
        .expect("constant matrix is a valid correlation")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub r_true: CorrelationMatrix,
    pub n_train: usize,
    pub n_test: usize,
    pub extra_noise_predictors: usize,
    pub seed: u64,
}

impl SimulationScenario {
    pub fn new(name: impl Into<String>, a: f64, b: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            a,
            b,
            r_true: default_correlation(),
            n_train: 500,
            n_test: 1000,
            extra_noise_predictors: 0,
            seed,
        }
    }

    /// `weak`, `moderate` or `strong`, optionally followed by `+noiseK` to
    /// append `K` irrelevant predictors (e.g. `weak+noise2`).
    pub fn named(token: &str, seed: u64) -> Result<Self> {
        let (base, noise) = match token.split_once('+') {
            Some((base, extra)) => {
                let k = extra
                    .strip_prefix("noise")
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| invalid(format!("bad scenario modifier '{extra}'")))?;
                (base, k)
            }
            None => (token, 0),
        };
        let (a, b) = match base {
            "weak" => (0.3, 0.1),
            "moderate" => (0.6, 0.1),
            "strong" => (1.0, 0.1),
            other => return Err(invalid(format!("unknown scenario '{other}'"))),
        };
        let mut s = Self::new(token, a, b, seed);
        s.extra_noise_predictors = noise;
        Ok(s)
    }

    pub fn n_features(&self) -> usize {
        3 + self.extra_noise_predictors
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(invalid("n_train and n_test must be at least 1"));
        }
        if self.r_true.dim() != 3 {
            return Err(invalid("the built-in scenario has three labels"));
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(invalid("A and B must be finite"));
        }
        Ok(())
    }

    pub fn means_of(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        true_means(x, self.a, self.b)
    }
}

/// `f₁ = A·sin(π x₁x₂) − B`, `f₂ = A·sin(π x₁x₂) + B`, `f₃ = A·x₃`.
pub fn true_means(x: &DMatrix<f64>, a: f64, b: f64) -> Result<DMatrix<f64>> {
    if x.ncols() < 3 {
        return Err(invalid(format!("need at least 3 predictors, got {}", x.ncols())));
    }
    Ok(DMatrix::from_fn(x.nrows(), 3, |i, k| {
        let s = a * (std::f64::consts::PI * x[(i, 0)] * x[(i, 1)]).sin();
        match k {
            0 => s - b,
            1 => s + b,
            _ => a * x[(i, 2)],
        }
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedData {
    pub train: Dataset,
    pub test: Dataset,
    pub test_true_means: DMatrix<f64>,
    pub scenario: SimulationScenario,
}

struct Draws {
    x: DMatrix<f64>,
    z: DMatrix<f64>,
}

fn draw_block(
    scenario: &SimulationScenario,
    n: usize,
    signal: &mut RngStream,
    noise_x: &mut RngStream,
    noise_eps: &mut RngStream,
) -> Result<Draws> {
    let p = scenario.n_features();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for v in 0..3 {
            x[(i, v)] = signal.uniform_range(-1.0, 1.0);
        }
        for v in 3..p {
            x[(i, v)] = noise_x.uniform_range(-1.0, 1.0);
        }
    }
    let mut z = scenario.means_of(&x)?;
    let l = scenario.r_true.cholesky_lower();
    for i in 0..n {
        let u: Vec<f64> = (0..3).map(|_| noise_eps.standard_normal()).collect();
        for k in 0..3 {
            z[(i, k)] += (0..=k).map(|j| l[(k, j)] * u[j]).sum::<f64>();
        }
    }
    Ok(Draws { x, z })
}

fn to_dataset(d: &Draws) -> Result<Dataset> {
    let p = d.x.ncols();
    Dataset::new(
        d.x.clone(),
        d.z.map(|v| u8::from(v > 0.0)),
        (1..=p).map(|v| format!("x{v}")).collect(),
        (1..=3).map(|k| format!("y{k}")).collect(),
    )
}

/// Draw training and test sets. The relevant predictors, the irrelevant
/// predictors and the latent noise come from separate sub-streams, so the
/// number of irrelevant predictors never changes the labels.
pub fn generate_dataset(scenario: &SimulationScenario, rng: &RngStream) -> Result<GeneratedData> {
    Ok(generate_with_latents(scenario, rng)?.0)
}

/// Like [`generate_dataset`], additionally returning the latent matrices
/// `(Z_train, Z_test)` the labels were thresholded from.
pub fn generate_with_latents(
    scenario: &SimulationScenario,
    rng: &RngStream,
) -> Result<(GeneratedData, DMatrix<f64>, DMatrix<f64>)> {
    scenario.validate()?;
    let mut signal = rng.split(1);
    let mut noise_x = rng.split(2);
    let mut noise_eps = rng.split(3);
    let train = draw_block(scenario, scenario.n_train, &mut signal, &mut noise_x, &mut noise_eps)?;
    let test = draw_block(scenario, scenario.n_test, &mut signal, &mut noise_x, &mut noise_eps)?;
    let data = GeneratedData {
        train: to_dataset(&train)?,
        test: to_dataset(&test)?,
        test_true_means: scenario.means_of(&test.x)?,
        scenario: scenario.clone(),
    };
    Ok((data, train.z, test.z))
}

/// Exact-up-to-Monte-Carlo distribution of the label combination at mean
/// vector `means` under `r`, renormalized to sum to one.
pub fn true_combination_distribution_at(
    means: &[f64],
    r: &CorrelationMatrix,
    target_se: f64,
    rng: &mut RngStream,
) -> Result<LabelCombinationDistribution> {
    let est = orthant_distribution(means, r, target_se, rng)?;
    let total: f64 = est.iter().map(|e| e.probability).sum();
    LabelCombinationDistribution::new(r.dim(), est.iter().map(|e| e.probability / total).collect())
}

/// Distribution of the label combination at predictor vector `x`.
pub fn true_combination_distribution(
    x: &[f64],
    scenario: &SimulationScenario,
    target_se: f64,
    rng: &mut RngStream,
) -> Result<LabelCombinationDistribution> {
    let m = scenario.means_of(&DMatrix::from_row_slice(1, x.len(), x))?;
    let means: Vec<f64> = m.row(0).iter().copied().collect();
    true_combination_distribution_at(&means, &scenario.r_true, target_se, rng)
}

/// True distributions for every row of a test set, row `i` on sub-stream `i`.
pub fn true_distributions(
    true_means: &DMatrix<f64>,
    r: &CorrelationMatrix,
    target_se: f64,
    rng: &RngStream,
) -> Result<Vec<LabelCombinationDistribution>> {
    use rayon::prelude::*;
    (0..true_means.nrows())
        .into_par_iter()
        .map(|i| {
            let means: Vec<f64> = true_means.row(i).iter().copied().collect();
            true_combination_distribution_at(&means, r, target_se, &mut rng.split(i as u64))
        })
        .collect()
}
