//! Training and evaluation sets for the configured task.

use poperm_core::linalg::DenseMatrix;
use poperm_core::tasks::idx::find_mnist;
use poperm_core::tasks::mosaic::{image_stats, normalise_images};
use poperm_core::tasks::{
    gen_eval_sets, gen_sort_batch, load_idx, make_mosaic, synthetic_image, Image, MosaicInstance,
    Split,
};

use crate::config::{DataSource, RunConfig, Task};
use crate::CliError;

/// One input set and its rows in correct position order.
#[derive(Clone, Debug)]
pub struct Example {
    pub input: DenseMatrix,
    pub target: DenseMatrix,
}

/// Named group of held-out examples.
#[derive(Clone, Debug)]
pub struct EvalGroup {
    pub label: EvalLabel,
    pub examples: Vec<Example>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalLabel {
    Interval(f64, f64),
    Split(&'static str),
}

pub enum Dataset {
    Sort(RunConfig),
    Mosaic(MosaicData),
}

pub struct MosaicData {
    cfg: RunConfig,
    train: Vec<Image>,
    validation: Vec<Image>,
    test: Vec<Image>,
    pub source: &'static str,
}

const SHUFFLE_DOMAIN: u64 = 0x7368_7566_666c_6500;

impl Dataset {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        match cfg.task {
            Task::Sort => Ok(Dataset::Sort(cfg.clone())),
            Task::Mosaic => Ok(Dataset::Mosaic(MosaicData::new(cfg)?)),
        }
    }

    /// Flattened pixels per tile, or 1 for numbers.
    pub fn element_dim(&self) -> usize {
        match self {
            Dataset::Sort(_) => 1,
            Dataset::Mosaic(m) => m.tile_pixels(),
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        let cfg = match self {
            Dataset::Sort(cfg) => cfg,
            Dataset::Mosaic(m) => &m.cfg,
        };
        cfg.train_sets.div_ceil(cfg.batch_size)
    }

    /// Training batch number `step`; the training pool wraps at each epoch.
    pub fn train_batch(&self, step: u64) -> Result<Vec<Example>, CliError> {
        match self {
            Dataset::Sort(cfg) => Ok(gen_sort_batch(&cfg.sort_task(), step)
                .into_iter()
                .map(|e| Example {
                    input: e.input,
                    target: e.target,
                })
                .collect()),
            Dataset::Mosaic(m) => {
                let b = m.cfg.batch_size as u64;
                (step * b..(step + 1) * b)
                    .map(|sample| {
                        let image = &m.train[(sample % m.train.len() as u64) as usize];
                        m.example(image, Split::Train, sample)
                    })
                    .collect()
            }
        }
    }

    /// Validation examples scored during training.
    pub fn validation(&self) -> Result<Vec<Example>, CliError> {
        match self {
            Dataset::Sort(cfg) => Ok(sort_sets(cfg, Split::Validation, (cfg.train_lo, cfg.train_hi), cfg.val_sets)),
            Dataset::Mosaic(m) => m.examples(&m.validation, Split::Validation),
        }
    }

    /// Held-out groups: one per interval for sorting, the test split for mosaics.
    pub fn evaluation(&self) -> Result<Vec<EvalGroup>, CliError> {
        match self {
            Dataset::Sort(cfg) => Ok(cfg
                .eval_intervals
                .iter()
                .map(|&[lo, hi]| EvalGroup {
                    label: EvalLabel::Interval(lo, hi),
                    examples: sort_sets(cfg, Split::Test, (lo, hi), cfg.eval_sets),
                })
                .collect()),
            Dataset::Mosaic(m) => Ok(vec![EvalGroup {
                label: EvalLabel::Split("test"),
                examples: m.examples(&m.test, Split::Test)?,
            }]),
        }
    }
}

fn sort_sets(cfg: &RunConfig, split: Split, interval: (f64, f64), count: usize) -> Vec<Example> {
    gen_eval_sets(cfg.seed, split, cfg.n, interval, count)
        .into_iter()
        .map(|e| Example {
            input: e.input,
            target: e.target,
        })
        .collect()
}

impl MosaicData {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let use_idx = match cfg.data {
            DataSource::Synthetic => None,
            DataSource::Auto => find_mnist(),
            DataSource::Idx => Some(find_mnist().ok_or_else(|| {
                CliError::Usage("data=idx but no MNIST image files under POPERM_DATA_DIR".into())
            })?),
        };
        if let Some((train_path, test_path)) = use_idx {
            let train = load_images(&train_path, cfg.train_sets + cfg.val_sets)?;
            let test = load_images(&test_path, cfg.eval_sets)?;
            let (train, validation) = split_off(train, cfg.train_sets);
            return Ok(Self {
                cfg: cfg.clone(),
                train,
                validation,
                test,
                source: "idx",
            });
        }
        let style = cfg.style.into();
        let gen = |split, count: usize| -> Vec<Image> {
            (0..count as u64).map(|i| synthetic_image(cfg.seed, split, i, style)).collect()
        };
        let mut train = gen(Split::Train, cfg.train_sets);
        let mut validation = gen(Split::Validation, cfg.val_sets);
        let mut test = gen(Split::Test, cfg.eval_sets);
        let stats = image_stats(&train);
        for images in [&mut train, &mut validation, &mut test] {
            normalise_images(images, stats);
        }
        Ok(Self {
            cfg: cfg.clone(),
            train,
            validation,
            test,
            source: "synthetic",
        })
    }

    fn tile_pixels(&self) -> usize {
        let image = &self.train[0];
        let up = |size: usize, parts: usize| size.div_ceil(parts);
        up(image.rows, self.cfg.grid_rows) * up(image.cols, self.cfg.grid_cols)
    }

    fn instance(&self, image: &Image, split: Split, index: u64) -> Result<MosaicInstance, CliError> {
        let tag = match split {
            Split::Train => 1u64,
            Split::Validation => 2,
            Split::Test => 3,
        };
        let seed = self.cfg.seed ^ SHUFFLE_DOMAIN ^ (tag << 56) ^ index;
        Ok(make_mosaic(image, self.cfg.grid_rows, self.cfg.grid_cols, seed)?)
    }

    fn example(&self, image: &Image, split: Split, index: u64) -> Result<Example, CliError> {
        let inst = self.instance(image, split, index)?;
        Ok(Example {
            target: inst.target(),
            input: inst.tiles,
        })
    }

    fn examples(&self, images: &[Image], split: Split) -> Result<Vec<Example>, CliError> {
        images
            .iter()
            .enumerate()
            .map(|(i, image)| self.example(image, split, i as u64))
            .collect()
    }
}

fn load_images(path: &std::path::Path, limit: usize) -> Result<Vec<Image>, CliError> {
    let stack = load_idx(path)?;
    let (count, rows, cols) = stack.shape();
    (0..count.min(limit))
        .map(|i| Ok(Image::new(rows, cols, stack.image(i).to_vec())?))
        .collect()
}

fn split_off(mut images: Vec<Image>, at: usize) -> (Vec<Image>, Vec<Image>) {
    let rest = images.split_off(at.min(images.len()));
    (images, rest)
}
