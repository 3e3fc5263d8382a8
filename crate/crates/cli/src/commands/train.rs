use std::fs;
use std::path::PathBuf;

use clap::Args;
use poperm_core::model::thread_pool;
use poperm_core::train::save_checkpoint;

use crate::commands::JsonLines;
use crate::config::RunConfig;
use crate::train::train;
use crate::{CliError, ConfigFlags};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Flat JSON run config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// Worker threads for batch parallelism; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(args.config.as_deref(), args.flags.overrides())?;
    let outdir = cfg
        .outdir
        .clone()
        .ok_or_else(|| CliError::Usage("train needs --outdir (flag or config field)".into()))?;
    let pool = thread_pool(args.threads)?;

    fs::create_dir_all(&outdir)?;
    fs::write(outdir.join("config.json"), cfg.to_json() + "\n")?;
    let mut metrics = JsonLines::create(&outdir.join("metrics.jsonl"))?;
    let outcome = train(&cfg, pool.as_ref(), |record| {
        eprintln!(
            "step {:>6}  loss {:.6}  acc {:.4}  mse_hard {:.6}  eta {:.4}",
            record.step, record.loss, record.accuracy, record.mse_hard, record.eta
        );
        metrics.write(record)
    })?;
    save_checkpoint(&outcome.store, outdir.join("final.popt"))?;
    Ok(())
}
