//! The `mlcbart` command-line tool. Each subcommand lives in its own module.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub mod evaluate;
pub mod experiment;
pub mod fit;
pub mod predict;
pub mod simulate;
pub mod tables;

#[derive(Parser)]
#[command(name = "mlcbart", version, about = "Multilabel classification with correlated sum-of-trees probit models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FitMode {
    /// Estimate the label correlation matrix.
    Multivariate,
    /// Fix the correlation matrix to the identity.
    Independent,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit a model to a CSV of features and 0/1 labels.
    Fit(fit::FitArgs),
    /// Predict label combinations for new rows.
    Predict(predict::PredictArgs),
    /// Score a prediction report against observed labels.
    Evaluate(evaluate::EvaluateArgs),
    /// Write a simulated train/test pair.
    Simulate(simulate::SimulateArgs),
    /// Run the replicated simulation study.
    Experiment(experiment::ExperimentArgs),
}

pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

pub(crate) fn ensure_dir(dir: &PathBuf) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Execute one parsed command line.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Fit(a) => fit::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Experiment(a) => experiment::run(a),
    }
}
