use std::io::{self, Write};
use std::path::PathBuf;

use clap::Args;
use poperm_core::model::thread_pool;
use poperm_core::tasks::Metrics;
use poperm_core::train::{load_checkpoint, ParamStore};
use serde::Serialize;

use crate::commands::JsonLines;
use crate::config::RunConfig;
use crate::data::{Dataset, EvalLabel};
use crate::train::score;
use crate::{CliError, ConfigFlags};

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Run config; defaults to `config.json` next to the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// JSONL destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

/// One line of eval output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<&'static str>,
    pub step: u64,
    pub count: usize,
    pub accuracy: f64,
    pub mse_hard: f64,
    pub mse_soft: f64,
    pub kendall_tau: Option<f64>,
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let sibling = args.checkpoint.with_file_name("config.json");
    let file = args.config.clone().or_else(|| sibling.is_file().then_some(sibling));
    let cfg = RunConfig::resolve(file.as_deref(), args.flags.overrides())?;
    let store = load_checkpoint(&args.checkpoint)?;
    let pool = thread_pool(args.threads)?;
    let records = evaluate_checkpoint(&cfg, &store, pool.as_ref())?;
    match &args.output {
        Some(path) => write_records(JsonLines::create(path)?, &records),
        None => write_records(JsonLines::new(io::stdout().lock()), &records),
    }
}

fn write_records<W: Write>(mut out: JsonLines<W>, records: &[EvalRecord]) -> Result<(), CliError> {
    records.iter().try_for_each(|r| out.write(r))
}

/// Scores `store` on every evaluation group of `cfg`.
pub fn evaluate_checkpoint(
    cfg: &RunConfig,
    store: &ParamStore,
    pool: Option<&rayon::ThreadPool>,
) -> Result<Vec<EvalRecord>, CliError> {
    let data = Dataset::new(cfg)?;
    let spec = cfg.model_spec(data.element_dim());
    let weights = spec
        .weights(store)
        .map_err(|e| CliError::Usage(format!("checkpoint does not match the {:?} task: {e}", cfg.task)))?;
    data.evaluation()?
        .into_iter()
        .map(|group| {
            let m: Metrics = score(&spec, &weights, &group.examples, pool)?;
            let (interval, split) = match group.label {
                EvalLabel::Interval(lo, hi) => (Some([lo, hi]), None),
                EvalLabel::Split(s) => (None, Some(s)),
            };
            Ok(EvalRecord {
                interval,
                split,
                step: store.step(),
                count: m.count,
                accuracy: m.accuracy,
                mse_hard: m.mse_hard,
                mse_soft: m.mse_soft,
                kendall_tau: m.kendall_tau,
            })
        })
        .collect()
}

