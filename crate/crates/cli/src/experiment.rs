use std::path::PathBuf;

use anyhow::bail;
use clap::Args;
use mlcbart::simulate::{run_experiment, ExperimentConfig, ModelKind};

use crate::{ensure_dir, split_list};

#[derive(Args)]
pub struct ExperimentArgs {
    /// Comma-separated scenarios, e.g. weak,strong,weak+noise2.
    #[arg(long, default_value = "weak,strong")]
    scenarios: String,
    /// Comma-separated subset of mlcbart,ubart,mlin,ulin,mtru,utru.
    #[arg(long, default_value = "mlcbart,ubart,mlin,ulin,mtru,utru")]
    models: String,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burn: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    wp: Option<f64>,
    #[arg(long, default_value_t = 500)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    /// Latent realizations per posterior draw at prediction time.
    #[arg(long)]
    c: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: ExperimentArgs) -> anyhow::Result<()> {
    let models = split_list(&a.models)
        .iter()
        .map(|m| m.parse::<ModelKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut config = ExperimentConfig::new(split_list(&a.scenarios), models, a.reps, a.seed);
    config.n_train = a.n_train;
    config.n_test = a.n_test;
    if let Some(v) = a.iters {
        config.model.iterations = v;
        if a.burn.is_none() {
            config.model.burn_in = v / 2;
        }
    }
    if let Some(v) = a.burn {
        config.model.burn_in = v;
    }
    if let Some(v) = a.thin {
        config.model.thin = v;
    }
    if let Some(v) = a.trees {
        config.model.tree_prior.b = v;
    }
    if let Some(v) = a.wp {
        config.model.correlation_prior.wp = v;
    }
    if let Some(v) = a.c {
        config.prediction_c = v;
    }
    let results = run_experiment(&config)?;
    ensure_dir(&a.out)?;
    results.write_csv(&a.out.join("results.csv"))?;
    results.write_summary_json(&a.out.join("summary.json"))?;
    if results.has_failures() {
        let n = results.cells.iter().filter(|c| c.error.is_some()).count();
        bail!("{n} experiment cells failed; see the error column of results.csv");
    }
    Ok(())
}
