use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use mlcbart::simulate::{generate_dataset, true_distributions, SimulationScenario};
use mlcbart::stats::orthant::DEFAULT_TARGET_SE;
use mlcbart::RngStream;

use crate::ensure_dir;
use crate::tables::write_distributions;

#[derive(Args)]
pub struct SimulateArgs {
    /// weak, moderate or strong.
    #[arg(long)]
    scenario: String,
    /// Irrelevant U(-1, 1) predictors appended after x1..x3.
    #[arg(long, default_value_t = 0)]
    noise_predictors: usize,
    #[arg(long, default_value_t = 500)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    /// Monte Carlo standard error target for the true distributions.
    #[arg(long, default_value_t = DEFAULT_TARGET_SE)]
    target_se: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: SimulateArgs) -> anyhow::Result<()> {
    let mut scenario = SimulationScenario::named(&a.scenario, a.seed)?;
    scenario.extra_noise_predictors = a.noise_predictors;
    scenario.n_train = a.n_train;
    scenario.n_test = a.n_test;
    let rng = RngStream::new(a.seed);
    let data = generate_dataset(&scenario, &rng)?;
    ensure_dir(&a.out)?;
    data.train.write_csv(&a.out.join("train.csv"))?;
    data.test.write_csv(&a.out.join("test.csv"))?;

    let mut w = csv::Writer::from_path(a.out.join("test_true_means.csv"))?;
    w.write_record(["instance_id", "f1", "f2", "f3"])?;
    for i in 0..data.test_true_means.nrows() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(data.test_true_means.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let truth = true_distributions(&data.test_true_means, &scenario.r_true, a.target_se, &rng.split(4))?;
    write_distributions(&a.out.join("test_true_dist.csv"), &truth)?;
    std::fs::write(
        a.out.join("scenario.json"),
        serde_json::to_string_pretty(&scenario)? + "\n",
    )
    .context("writing scenario.json")?;
    Ok(())
}
