//! `poperm`: train, evaluate, verify, inspect and benchmark permutation
//! optimisation models.

pub mod commands;
pub mod config;
pub mod data;
pub mod train;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{parse_intervals, DataSource, Model, Style, Task};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Numeric or runtime failure; exit code 1.
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] poperm_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "poperm", version, about = "Learning to permute sets with unrolled permutation optimisation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write metrics, config and checkpoint to --outdir.
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpoint on held-out sets.
    Eval(commands::eval::EvalArgs),
    /// Compare analytic and finite-difference gradients of a full pipeline.
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Cross-check the total cost against its quadratic form and brute force.
    Oracle(commands::oracle::OracleArgs),
    /// Dump the learned comparison function over a grid of scalar inputs.
    Inspect(commands::inspect::InspectArgs),
    /// Time forward and backward passes over a list of set sizes.
    Bench(commands::bench::BenchArgs),
}

/// Run-config fields settable from the command line; unset flags keep the
/// value from the config file or the task default.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ConfigFlags {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_rows: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_cols: Option<usize>,
    /// Inner gradient-descent steps.
    #[arg(long, visible_alias = "T")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sinkhorn_iters: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embed: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_sets: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_hi: Option<f64>,
    /// Comma-separated `lo:hi` pairs.
    #[arg(long, value_parser = parse_interval_flag, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_intervals: Option<Intervals>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_sets: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_sets: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSource>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub style: Option<Style>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outdir: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Intervals(pub Vec<[f64; 2]>);

fn parse_interval_flag(s: &str) -> Result<Intervals, String> {
    parse_intervals(s).map(Intervals)
}

impl ConfigFlags {
    pub fn overrides(&self) -> serde_json::Map<String, serde_json::Value> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => unreachable!("flags serialise to an object"),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => commands::train::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Gradcheck(a) => commands::gradcheck::run(a),
        Command::Oracle(a) => commands::oracle::run(a),
        Command::Inspect(a) => commands::inspect::run(a),
        Command::Bench(a) => commands::bench::run(a),
    }
}
