use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use mlcbart::artifact::{save_model, ModelArtifact};
use mlcbart::data::load_csv;
use mlcbart::sampler::{run_chain, Mode, ModelConfig};
use mlcbart::RngStream;

use crate::{split_list, FitMode};

#[derive(Args)]
pub struct FitArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated label column names; all other columns are features.
    #[arg(long)]
    labels: String,
    #[arg(long, value_enum, default_value = "multivariate")]
    mode: FitMode,
    /// Trees per label.
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burn: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Leaf prior scale: the prior puts each label's latent mean within ±r·σ_μ·√b.
    #[arg(long)]
    r: Option<f64>,
    /// Inverse-Wishart prior degrees of freedom.
    #[arg(long)]
    m0: Option<f64>,
    /// Inverse-Wishart proposal degrees of freedom.
    #[arg(long)]
    wp: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: FitArgs) -> anyhow::Result<()> {
    let labels = split_list(&a.labels);
    if labels.is_empty() {
        bail!("--labels is empty");
    }
    let data = load_csv(&a.data, &labels)?;
    let q = data.n_labels();
    let mut config = ModelConfig::default_for(q);
    config.mode = match a.mode {
        FitMode::Multivariate => Mode::Multivariate,
        FitMode::Independent => Mode::FixedIdentityR,
    };
    if let Some(v) = a.trees {
        config.tree_prior.b = v;
    }
    if let Some(v) = a.iters {
        config.iterations = v;
        if a.burn.is_none() {
            config.burn_in = v / 2;
        }
    }
    if let Some(v) = a.burn {
        config.burn_in = v;
    }
    if let Some(v) = a.thin {
        config.thin = v;
    }
    if let Some(v) = a.alpha {
        config.tree_prior.alpha = v;
    }
    if let Some(v) = a.beta {
        config.tree_prior.beta = v;
    }
    if let Some(v) = a.r {
        config.tree_prior.r = v;
    }
    if let Some(v) = a.m0 {
        config.correlation_prior.m0 = v;
    }
    if let Some(v) = a.wp {
        config.correlation_prior.wp = v;
    }
    config.seed = a.seed;
    config.validate(q)?;

    let draws = run_chain(&data, &config, RngStream::new(a.seed))?;
    let d = &draws.diagnostics;
    if let Some(rate) = d.correlation_acceptance_rate {
        eprintln!("correlation acceptance rate: {rate:.3}");
        if d.correlation_rate_flagged() {
            log::warn!("correlation acceptance rate {rate:.3} is outside [0.05, 0.95]; consider adjusting --wp");
        }
    }
    if let Some(rate) = d.tree_acceptance_rate {
        eprintln!("tree move acceptance rate: {rate:.3}");
    }
    let artifact = ModelArtifact::new(draws, data.feature_names.clone(), data.label_names.clone());
    save_model(&artifact, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}
