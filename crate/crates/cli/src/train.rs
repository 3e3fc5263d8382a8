//! Training loop and scoring shared by `train`, `eval` and the acceptance suite.

use std::time::Instant;

use poperm_core::model::{ModelSpec, Weights, ETA};
use poperm_core::permopt::ComparisonStructure;
use poperm_core::tasks::{evaluate, InstanceMetrics, Metrics};
use poperm_core::train::{adam_step, ParamStore};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{Dataset, Example};
use crate::CliError;

/// Seed domain of the parameter initialiser, kept apart from the data streams.
const INIT_DOMAIN: u64 = 0x696e_6974_0000_0000;

/// One line of `metrics.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub step: u64,
    /// Mean training loss since the previous record.
    pub loss: f64,
    pub accuracy: f64,
    pub mse_hard: f64,
    pub mse_soft: f64,
    pub eta: f64,
    pub wall_ms: Option<f64>,
}

pub struct TrainOutcome {
    pub spec: ModelSpec,
    pub store: ParamStore,
    pub records: Vec<MetricsRecord>,
}

pub fn init_store(cfg: &RunConfig, spec: &ModelSpec) -> Result<ParamStore, CliError> {
    Ok(spec.init_store(cfg.seed ^ INIT_DOMAIN)?)
}

/// Runs `cfg.epochs` epochs of Adam, calling `on_record` at every metrics point.
pub fn train<F>(cfg: &RunConfig, pool: Option<&ThreadPool>, mut on_record: F) -> Result<TrainOutcome, CliError>
where
    F: FnMut(&MetricsRecord) -> Result<(), CliError>,
{
    let data = Dataset::new(cfg)?;
    let spec = cfg.model_spec(data.element_dim());
    let mut store = init_store(cfg, &spec)?;
    let train_cfg = cfg.train_config();
    let validation = data.validation()?;
    let total = (cfg.epochs * data.batches_per_epoch()) as u64;
    let every = match cfg.eval_every {
        0 => data.batches_per_epoch() as u64,
        k => k as u64,
    };
    let start = Instant::now();
    let mut records = Vec::new();
    let (mut loss_sum, mut loss_count) = (0.0, 0usize);
    for step in 0..total {
        let batch = data.train_batch(step)?;
        let pairs: Vec<_> = batch.iter().map(|e| (&e.input, &e.target)).collect();
        let (loss, grads) = spec.batch_loss_and_grads(&store, &pairs, pool)?;
        if !loss.is_finite() {
            return Err(CliError::Runtime(format!("non-finite loss {loss} at step {step}")));
        }
        adam_step(&mut store, &grads, &train_cfg)?;
        loss_sum += loss;
        loss_count += 1;
        if (step + 1) % every == 0 || step + 1 == total {
            let weights = spec.weights(&store)?;
            let m = score(&spec, &weights, &validation, pool)?;
            let record = MetricsRecord {
                step: step + 1,
                loss: loss_sum / loss_count as f64,
                accuracy: m.accuracy,
                mse_hard: m.mse_hard,
                mse_soft: m.mse_soft,
                eta: store.get(ETA)?.as_scalar()?,
                wall_ms: cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
            };
            on_record(&record)?;
            records.push(record);
            (loss_sum, loss_count) = (0.0, 0);
        }
    }
    Ok(TrainOutcome { spec, store, records })
}

/// Forward pass, Hungarian rounding and metrics for every example, in order.
pub fn score_instances(
    spec: &ModelSpec,
    weights: &Weights,
    examples: &[Example],
    pool: Option<&ThreadPool>,
) -> Result<Vec<InstanceMetrics>, CliError> {
    let structure: ComparisonStructure = spec.structure;
    let one = |e: &Example| -> Result<InstanceMetrics, CliError> {
        let fwd = spec.forward(weights, &e.input)?;
        Ok(evaluate(&fwd.p, &e.input, &e.target, &structure)?)
    };
    match pool {
        Some(pool) => pool.install(|| examples.par_iter().map(one).collect()),
        None => examples.iter().map(one).collect(),
    }
}

pub fn score(
    spec: &ModelSpec,
    weights: &Weights,
    examples: &[Example],
    pool: Option<&ThreadPool>,
) -> Result<Metrics, CliError> {
    Ok(Metrics::from_instances(&score_instances(spec, weights, examples, pool)?))
}
