//! Run configuration: task defaults, then a flat JSON file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use poperm_core::permopt::{ComparisonStructure, InitMode};
use poperm_core::tasks::{SortTaskConfig, SyntheticStyle, EVAL_INTERVALS};
use poperm_core::train::TrainConfig;
use poperm_core::model::ModelSpec;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Sort,
    Mosaic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    PoU,
    PoLa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// IDX files from `POPERM_DATA_DIR` when present, else synthetic images.
    Auto,
    Synthetic,
    Idx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    GradientBlob,
    BlankQuadrants,
}

impl From<Style> for SyntheticStyle {
    fn from(s: Style) -> Self {
        match s {
            Style::GradientBlob => SyntheticStyle::GradientBlob,
            Style::BlankQuadrants => SyntheticStyle::BlankQuadrants,
        }
    }
}

/// Effective configuration of a run, echoed to `<outdir>/config.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub model: Model,
    /// Set size for sorting.
    pub n: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Inner gradient-descent steps.
    pub steps: usize,
    pub eta0: f64,
    pub sinkhorn_iters: usize,
    pub hidden: usize,
    /// Tile encoder width (mosaic only).
    pub embed: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub train_sets: usize,
    pub train_lo: f64,
    pub train_hi: f64,
    pub eval_intervals: Vec<[f64; 2]>,
    pub eval_sets: usize,
    /// Validation sets scored at each metrics point during training.
    pub val_sets: usize,
    /// Optimiser steps between metrics points; 0 means once per epoch.
    pub eval_every: usize,
    pub data: DataSource,
    pub style: Style,
    pub seed: u64,
    pub outdir: Option<PathBuf>,
    /// Record wall-clock times in metrics (breaks byte-identical reruns).
    pub timing: bool,
}

impl RunConfig {
    pub fn defaults(task: Task) -> Self {
        let intervals = EVAL_INTERVALS.iter().map(|&(lo, hi)| [lo, hi]).collect();
        let base = Self {
            task,
            model: Model::PoU,
            n: 5,
            grid_rows: 2,
            grid_cols: 2,
            steps: 6,
            eta0: 1.0,
            sinkhorn_iters: 4,
            hidden: 16,
            embed: 32,
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 512,
            epochs: 10,
            train_sets: 1 << 14,
            train_lo: 0.0,
            train_hi: 1.0,
            eval_intervals: intervals,
            eval_sets: 1000,
            val_sets: 200,
            eval_every: 0,
            data: DataSource::Auto,
            style: Style::GradientBlob,
            seed: 0,
            outdir: None,
            timing: false,
        };
        match task {
            Task::Sort => base,
            Task::Mosaic => Self {
                steps: 4,
                lr: 1e-3,
                batch_size: 32,
                hidden: 64,
                epochs: 80,
                train_sets: 4096,
                ..base
            },
        }
    }

    /// Layers task defaults, the optional JSON file and flag overrides, in that order.
    pub fn resolve(file: Option<&Path>, overrides: Map<String, Value>) -> Result<Self, CliError> {
        let from_file = match file {
            Some(path) => read_config_file(path)?,
            None => Map::new(),
        };
        let task_value = overrides
            .get("task")
            .or_else(|| from_file.get("task"))
            .cloned()
            .unwrap_or(json!("sort"));
        let task: Task = serde_json::from_value(task_value)
            .map_err(|e| CliError::Usage(format!("invalid task: {e}")))?;

        let mut merged = match serde_json::to_value(Self::defaults(task)) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("RunConfig serialises to an object"),
        };
        merged.extend(from_file);
        merged.extend(overrides);
        let cfg: Self = serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if self.task == Task::Sort && self.n < 2 {
            return bad(format!("n must be >= 2, got {}", self.n));
        }
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if self.steps == 0 || self.sinkhorn_iters == 0 || self.hidden == 0 || self.embed == 0 {
            return bad("steps, sinkhorn-iters, hidden and embed must be positive".into());
        }
        if !(self.train_lo < self.train_hi) {
            return bad(format!("train interval [{}, {}] is empty", self.train_lo, self.train_hi));
        }
        if let Some([lo, hi]) = self.eval_intervals.iter().find(|[lo, hi]| !(lo < hi)) {
            return bad(format!("eval interval [{lo}, {hi}] is empty"));
        }
        if self.batch_size == 0 || self.train_sets == 0 {
            return bad("batch-size and train-sets must be positive".into());
        }
        if !self.eta0.is_finite() {
            return bad("eta0 must be finite".into());
        }
        self.train_config().validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn structure(&self) -> ComparisonStructure {
        match self.task {
            Task::Sort => ComparisonStructure::Sequence(self.n),
            Task::Mosaic => ComparisonStructure::Grid {
                rows: self.grid_rows,
                cols: self.grid_cols,
            },
        }
    }

    pub fn set_size(&self) -> usize {
        self.structure().positions()
    }

    pub fn init_mode(&self) -> InitMode {
        match self.model {
            Model::PoU => InitMode::Uniform,
            Model::PoLa => InitMode::LinearAssignment,
        }
    }

    /// Model architecture; `tile_pixels` is the flattened tile size for mosaics.
    pub fn model_spec(&self, tile_pixels: usize) -> ModelSpec {
        let (input_dim, embed) = match self.task {
            Task::Sort => (1, None),
            Task::Mosaic => (tile_pixels, Some(self.embed)),
        };
        ModelSpec {
            init: self.init_mode(),
            structure: self.structure(),
            steps: self.steps,
            sinkhorn_iters: self.sinkhorn_iters,
            input_dim,
            hidden: self.hidden,
            embed,
            eta0: self.eta0,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
        }
    }

    pub fn sort_task(&self) -> SortTaskConfig {
        SortTaskConfig {
            n: self.n,
            train_interval: (self.train_lo, self.train_hi),
            eval_intervals: self.eval_intervals.iter().map(|&[lo, hi]| (lo, hi)).collect(),
            train_sets: self.train_sets,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

fn read_config_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Usage(format!("{}: config must be a JSON object", path.display()))),
        Err(e) => Err(CliError::Usage(format!("{}: {e}", path.display()))),
    }
}

/// Parses `lo:hi[,lo:hi...]`.
pub fn parse_intervals(s: &str) -> Result<Vec<[f64; 2]>, String> {
    s.split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| format!("interval `{part}` is not lo:hi"))?;
            let lo: f64 = lo.trim().parse().map_err(|e| format!("`{lo}`: {e}"))?;
            let hi: f64 = hi.trim().parse().map_err(|e| format!("`{hi}`: {e}"))?;
            Ok([lo, hi])
        })
        .collect()
}
