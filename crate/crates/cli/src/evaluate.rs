use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use mlcbart::data::load_labels;
use mlcbart::metrics::{mean_kl_over_testset, LabelMatrixPair, MetricReport};
use mlcbart::predict::{decisions_to_matrix, parse_pattern};

use crate::split_list;
use crate::tables::read_distributions;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Report written by `predict`.
    #[arg(long)]
    pred: PathBuf,
    /// CSV holding the observed label columns.
    #[arg(long)]
    truth: PathBuf,
    /// Label columns in `--truth`; defaults to the labels named in the report.
    #[arg(long)]
    labels: Option<String>,
    /// Estimated distributions (from `predict --distribution-out`).
    #[arg(long, requires = "true_dist")]
    pred_dist: Option<PathBuf>,
    /// True distributions (from `simulate`).
    #[arg(long, requires = "pred_dist")]
    true_dist: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: EvaluateArgs) -> anyhow::Result<()> {
    let mut r = csv::Reader::from_path(&a.pred).with_context(|| format!("opening {}", a.pred.display()))?;
    let header = r.headers()?.clone();
    let Some(dcol) = header.iter().position(|h| h == "decision_pattern") else {
        bail!("{}: no decision_pattern column", a.pred.display());
    };
    let labels = match &a.labels {
        Some(l) => split_list(l),
        None => header
            .iter()
            .filter_map(|h| h.strip_prefix("marginal_").map(str::to_string))
            .collect(),
    };
    let mut decisions = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let (q, idx) = parse_pattern(rec.get(dcol).unwrap_or(""))
            .with_context(|| format!("{} row {}", a.pred.display(), row + 1))?;
        if q != labels.len() {
            bail!("{} row {}: pattern has {q} labels, expected {}", a.pred.display(), row + 1, labels.len());
        }
        decisions.push(idx);
    }
    let observed = load_labels(&a.truth, &labels)?;
    let predicted = decisions_to_matrix(&decisions, labels.len());
    let pair = LabelMatrixPair::new(&predicted, &observed)?;
    let kl = match (&a.pred_dist, &a.true_dist) {
        (Some(p), Some(t)) => Some(mean_kl_over_testset(&read_distributions(t)?, &read_distributions(p)?)?),
        _ => None,
    };
    let report = MetricReport::compute(&pair, kl);
    std::fs::write(&a.out, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}
