use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_dataset, true_distributions, SimulationScenario};
use crate::error::{invalid, Error, Result};
use crate::metrics::{mean_kl_over_testset, LabelMatrixPair, MetricReport};
use crate::predict::{
    decisions_to_matrix, hard_classify, label_distribution, predict_dataset, PredictionConfig,
    DEFAULT_REALIZATIONS,
};
use crate::rng::RngStream;
use crate::sampler::{run_chain, LinearBasisSpec, MeanModelSpec, Mode, ModelConfig};
use crate::stats::orthant::DEFAULT_TARGET_SE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Sum-of-trees means with an estimated correlation matrix.
    Mlcbart,
    /// Sum-of-trees means, independent labels.
    Ubart,
    /// Linear probit on the raw predictors, estimated correlation.
    Mlin,
    Ulin,
    /// Linear probit on the generating basis, estimated correlation.
    Mtru,
    Utru,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Mlcbart,
        ModelKind::Ubart,
        ModelKind::Mlin,
        ModelKind::Ulin,
        ModelKind::Mtru,
        ModelKind::Utru,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlcbart => "mlcbart",
            ModelKind::Ubart => "ubart",
            ModelKind::Mlin => "mlin",
            ModelKind::Ulin => "ulin",
            ModelKind::Mtru => "mtru",
            ModelKind::Utru => "utru",
        }
    }

    pub fn is_multivariate(self) -> bool {
        matches!(self, ModelKind::Mlcbart | ModelKind::Mlin | ModelKind::Mtru)
    }

    fn stream_id(self) -> u64 {
        Self::ALL.iter().position(|&k| k == self).unwrap_or(0) as u64
    }

    /// Specialize `base` (iteration counts and priors) to this model for
    /// data with `p` predictors.
    pub fn model_config(self, base: &ModelConfig, p: usize) -> ModelConfig {
        let mut c = base.clone();
        c.mode = if self.is_multivariate() {
            Mode::Multivariate
        } else {
            Mode::FixedIdentityR
        };
        c.mean_model = match self {
            ModelKind::Mlcbart | ModelKind::Ubart => MeanModelSpec::SumOfTrees,
            ModelKind::Mlin | ModelKind::Ulin => MeanModelSpec::LinearBasis(LinearBasisSpec::raw(p)),
            ModelKind::Mtru | ModelKind::Utru => MeanModelSpec::LinearBasis(LinearBasisSpec::oracle()),
        };
        c
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| invalid(format!("unknown model '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Scenario tokens understood by [`SimulationScenario::named`].
    pub scenarios: Vec<String>,
    pub models: Vec<ModelKind>,
    pub replications: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// Iteration counts and priors shared by all models.
    pub model: ModelConfig,
    pub prediction_c: usize,
    /// Monte Carlo precision of the true label-combination distributions.
    pub true_target_se: f64,
}

impl ExperimentConfig {
    pub fn new(scenarios: Vec<String>, models: Vec<ModelKind>, replications: usize, seed: u64) -> Self {
        Self {
            scenarios,
            models,
            replications,
            seed,
            n_train: 500,
            n_test: 1000,
            model: ModelConfig::default_for(3),
            prediction_c: DEFAULT_REALIZATIONS,
            true_target_se: DEFAULT_TARGET_SE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.scenarios.is_empty() || self.models.is_empty() {
            return Err(invalid("need at least one scenario and one model"));
        }
        for s in &self.scenarios {
            SimulationScenario::named(s, 0)?;
        }
        self.model.validate(3)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario: String,
    pub replication: usize,
    pub model: ModelKind,
    pub metrics: Option<MetricReport>,
    /// Posterior means of `r12, r13, r23`.
    pub correlation: Option<Vec<f64>>,
    pub correlation_acceptance: Option<f64>,
    pub error: Option<String>,
}

pub const METRIC_NAMES: [&str; 9] = [
    "subset_accuracy",
    "hamming_loss",
    "macro_precision",
    "macro_f1",
    "mean_kl",
    "median_kl",
    "r12",
    "r13",
    "r23",
];

impl CellResult {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 9] {
        let m = self.metrics.as_ref();
        let r = |i: usize| self.correlation.as_ref().map(|c| c[i]);
        [
            m.map(|m| m.subset_accuracy),
            m.map(|m| m.hamming_loss),
            m.map(|m| m.macro_precision),
            m.map(|m| m.macro_f1),
            m.and_then(|m| m.mean_kl),
            m.and_then(|m| m.median_kl),
            r(0),
            r(1),
            r(2),
        ]
    }

    pub fn value(&self, metric: &str) -> Option<f64> {
        let i = METRIC_NAMES.iter().position(|m| *m == metric)?;
        self.values()[i]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub coefficient: String,
    /// Mean over replications of the posterior mean.
    pub mean: f64,
    /// Sample standard deviation of the posterior means across replications.
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioModelSummary {
    pub scenario: String,
    pub model: ModelKind,
    pub replications_ok: usize,
    pub means: BTreeMap<String, f64>,
    pub correlation: Option<Vec<CorrelationSummary>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    /// Ordered by scenario, then replication, then model.
    pub cells: Vec<CellResult>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Posterior-mean correlation estimates of one model in one scenario,
/// aggregated over replications. `None` when no replication succeeded.
pub fn correlation_recovery_summary(
    results: &ExperimentResults,
    scenario: &str,
    model: ModelKind,
) -> Option<Vec<CorrelationSummary>> {
    let per_rep: Vec<&Vec<f64>> = results
        .cells
        .iter()
        .filter(|c| c.scenario == scenario && c.model == model)
        .filter_map(|c| c.correlation.as_ref())
        .collect();
    if per_rep.is_empty() {
        return None;
    }
    Some(
        ["r12", "r13", "r23"]
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let v: Vec<f64> = per_rep.iter().map(|c| c[i]).collect();
                let (mean, sd) = mean_sd(&v);
                CorrelationSummary {
                    coefficient: name.to_string(),
                    mean,
                    sd,
                }
            })
            .collect(),
    )
}

impl ExperimentResults {
    pub fn cells_for(&self, scenario: &str, model: ModelKind) -> impl Iterator<Item = &CellResult> + '_ {
        let scenario = scenario.to_string();
        self.cells
            .iter()
            .filter(move |c| c.scenario == scenario && c.model == model)
    }

    pub fn has_failures(&self) -> bool {
        self.cells.iter().any(|c| c.error.is_some())
    }

    /// Each cell's values minus the mean over models on the same dataset
    /// (scenario and replication), in [`METRIC_NAMES`] order.
    pub fn centered(&self) -> Vec<[Option<f64>; 9]> {
        self.cells
            .iter()
            .map(|cell| {
                let peers: Vec<[Option<f64>; 9]> = self
                    .cells
                    .iter()
                    .filter(|c| c.scenario == cell.scenario && c.replication == cell.replication)
                    .map(|c| c.values())
                    .collect();
                let own = cell.values();
                std::array::from_fn(|m| {
                    let v = own[m]?;
                    let vals: Vec<f64> = peers.iter().filter_map(|p| p[m]).collect();
                    Some(v - vals.iter().sum::<f64>() / vals.len() as f64)
                })
            })
            .collect()
    }

    pub fn summary(&self) -> Vec<ScenarioModelSummary> {
        let mut out = Vec::new();
        for scenario in &self.config.scenarios {
            for &model in &self.config.models {
                let cells: Vec<&CellResult> = self.cells_for(scenario, model).collect();
                let mut means = BTreeMap::new();
                for (m, name) in METRIC_NAMES.iter().enumerate() {
                    let v: Vec<f64> = cells.iter().filter_map(|c| c.values()[m]).collect();
                    if !v.is_empty() {
                        means.insert(name.to_string(), mean_sd(&v).0);
                    }
                }
                out.push(ScenarioModelSummary {
                    scenario: scenario.clone(),
                    model,
                    replications_ok: cells.iter().filter(|c| c.error.is_none()).count(),
                    means,
                    correlation: correlation_recovery_summary(self, scenario, model),
                });
            }
        }
        out
    }

    /// Long format: one row per scenario, replication, model and metric.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["scenario", "replication", "model", "metric", "value", "centered", "error"])?;
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for (cell, centered) in self.cells.iter().zip(self.centered()) {
            let values = cell.values();
            for (m, name) in METRIC_NAMES.iter().enumerate() {
                w.write_record([
                    cell.scenario.as_str(),
                    &(cell.replication + 1).to_string(),
                    cell.model.name(),
                    name,
                    &fmt(values[m]),
                    &fmt(centered[m]),
                    cell.error.as_deref().unwrap_or(""),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            config: &'a ExperimentConfig,
            summaries: Vec<ScenarioModelSummary>,
        }
        let s = Summary {
            config: &self.config,
            summaries: self.summary(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&s)? + "\n")?;
        Ok(())
    }
}

fn run_cell(
    config: &ExperimentConfig,
    scenario: &SimulationScenario,
    data: &super::GeneratedData,
    truth: &[crate::predict::LabelCombinationDistribution],
    replication: usize,
    model: ModelKind,
) -> Result<(MetricReport, Vec<f64>, Option<f64>)> {
    let root = RngStream::new(config.seed);
    let mut model_config = model.model_config(&config.model, data.train.n_features());
    let chain_rng = root.split(2).split(replication as u64).split(model.stream_id());
    model_config.seed = chain_rng.seed();
    let draws = run_chain(&data.train, &model_config, chain_rng)?;
    let pred_cfg = PredictionConfig {
        c: config.prediction_c,
        seed: root.split(4).split(replication as u64).split(model.stream_id()).seed(),
    };
    let preds = predict_dataset(&draws, &data.test.x, &pred_cfg)?;
    let estimated = preds
        .iter()
        .map(|p| label_distribution(&draws, p))
        .collect::<Result<Vec<_>>>()?;
    let decisions: Vec<usize> = estimated.iter().map(hard_classify).collect();
    let predicted = decisions_to_matrix(&decisions, 3);
    let pair = LabelMatrixPair::new(&predicted, &data.test.y)?;
    let kl = mean_kl_over_testset(truth, &estimated)?;
    log::info!(
        "{} rep {} {}: done ({} draws)",
        scenario.name,
        replication + 1,
        model,
        draws.len()
    );
    Ok((
        MetricReport::compute(&pair, Some(kl)),
        draws.mean_off_diagonal(),
        draws.diagnostics.correlation_acceptance_rate,
    ))
}

/// Generate, fit, predict and score every (scenario, replication, model)
/// cell. Datasets depend only on the root seed and the replication, so
/// scenarios differing only in signal strength or irrelevant predictors
/// share predictors and latent noise. A failing cell is recorded and the
/// run continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let root = RngStream::new(config.seed);
    let jobs: Vec<(usize, usize)> = (0..config.scenarios.len())
        .flat_map(|s| (0..config.replications).map(move |r| (s, r)))
        .collect();
    let cells: Vec<Vec<CellResult>> = jobs
        .par_iter()
        .map(|&(s, rep)| {
            let token = &config.scenarios[s];
            let data_rng = root.split(1).split(rep as u64);
            let fail_all = |e: Error| {
                config
                    .models
                    .iter()
                    .map(|&model| CellResult {
                        scenario: token.clone(),
                        replication: rep,
                        model,
                        metrics: None,
                        correlation: None,
                        correlation_acceptance: None,
                        error: Some(e.to_string()),
                    })
                    .collect::<Vec<_>>()
            };
            let mut scenario = match SimulationScenario::named(token, data_rng.seed()) {
                Ok(s) => s,
                Err(e) => return fail_all(e),
            };
            scenario.n_train = config.n_train;
            scenario.n_test = config.n_test;
            let prepared = generate_dataset(&scenario, &data_rng).and_then(|data| {
                let truth = true_distributions(
                    &data.test_true_means,
                    &scenario.r_true,
                    config.true_target_se,
                    &root.split(3).split(rep as u64),
                )?;
                Ok((data, truth))
            });
            let (data, truth) = match prepared {
                Ok(v) => v,
                Err(e) => return fail_all(e),
            };
            config
                .models
                .iter()
                .map(|&model| {
                    let base = CellResult {
                        scenario: token.clone(),
                        replication: rep,
                        model,
                        metrics: None,
                        correlation: None,
                        correlation_acceptance: None,
                        error: None,
                    };
                    match run_cell(config, &scenario, &data, &truth, rep, model) {
                        Ok((metrics, correlation, acc)) => CellResult {
                            metrics: Some(metrics),
                            correlation: Some(correlation),
                            correlation_acceptance: acc,
                            ..base
                        },
                        Err(e) => {
                            log::warn!("{token} rep {} {model}: {e}", rep + 1);
                            CellResult {
                                error: Some(e.to_string()),
                                ..base
                            }
                        }
                    }
                })
                .collect()
        })
        .collect();
    Ok(ExperimentResults {
        config: config.clone(),
        cells: cells.into_iter().flatten().collect(),
    })
}
