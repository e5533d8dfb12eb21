use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use mlcbart::artifact::load_model;
use mlcbart::data::load_features;
use mlcbart::predict::{
    credible_interval, expected_loss_decision, label_distribution, marginal_probabilities, pattern_string,
    predict_dataset, LossSpec, LossTable, PredictionConfig, DEFAULT_REALIZATIONS,
};

use crate::tables::write_distributions;

const TOP: usize = 5;

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV containing at least the model's feature columns.
    #[arg(long)]
    data: PathBuf,
    /// Latent realizations per posterior draw.
    #[arg(long, default_value_t = DEFAULT_REALIZATIONS)]
    c: usize,
    /// Credible interval level for the per-label probabilities.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// `zero_one`, `hamming`, or a CSV with columns predicted,observed,loss.
    #[arg(long, default_value = "zero_one")]
    loss: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the full label-combination distribution per row.
    #[arg(long)]
    distribution_out: Option<PathBuf>,
}

fn parse_loss(s: &str) -> anyhow::Result<LossSpec> {
    Ok(match s {
        "zero_one" => LossSpec::ZeroOne,
        "hamming" => LossSpec::Hamming,
        path => LossSpec::Table(LossTable::read_csv(path.as_ref())?),
    })
}

pub fn run(a: PredictArgs) -> anyhow::Result<()> {
    let artifact = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let loss = parse_loss(&a.loss)?;
    let draws = &artifact.draws;
    if draws.len() < 2 {
        bail!("the model holds {} posterior draws; at least two are needed", draws.len());
    }
    let x = load_features(&a.data, &artifact.feature_names)?;
    let cfg = PredictionConfig { c: a.c, seed: a.seed };
    let preds = predict_dataset(draws, &x, &cfg)?;
    let q = draws.n_labels;

    let mut w = csv::Writer::from_path(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut header = vec!["instance_id".to_string()];
    for t in 1..=TOP {
        header.push(format!("top{t}_pattern"));
        header.push(format!("top{t}_prob"));
    }
    for name in &artifact.label_names {
        header.push(format!("marginal_{name}"));
        header.push(format!("ci_low_{name}"));
        header.push(format!("ci_high_{name}"));
    }
    header.push("decision_pattern".into());
    w.write_record(&header)?;

    let mut dists = Vec::with_capacity(preds.len());
    for (i, p) in preds.iter().enumerate() {
        let dist = label_distribution(draws, p)?;
        let mut rec = vec![(i + 1).to_string()];
        for (idx, prob) in dist.top(TOP) {
            rec.push(pattern_string(idx, q));
            rec.push(prob.to_string());
        }
        for _ in dist.n_patterns()..TOP {
            rec.push(String::new());
            rec.push(String::new());
        }
        let marginals = marginal_probabilities(&dist);
        let ci = credible_interval(&p.per_draw_marginals, a.level)?;
        for (m, (lo, hi)) in marginals.iter().zip(ci) {
            rec.push(m.to_string());
            rec.push(lo.to_string());
            rec.push(hi.to_string());
        }
        rec.push(pattern_string(expected_loss_decision(&dist, &loss)?, q));
        w.write_record(&rec)?;
        dists.push(dist);
    }
    w.flush()?;
    if let Some(path) = &a.distribution_out {
        write_distributions(path, &dists)?;
    }
    Ok(())
}
