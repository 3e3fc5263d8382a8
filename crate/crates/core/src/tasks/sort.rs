//! Number-sorting data.
//!
//! Every set is addressed by `(seed, split, index)`: a ChaCha8 generator is
//! seeded from `seed` mixed with a per-split constant and switched to stream
//! `index`, so any set can be regenerated without replaying the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// The evaluation intervals used for the generalisation study.
pub const EVAL_INTERVALS: [(f64, f64); 7] = [
    (0.0, 1.0),
    (0.0, 10.0),
    (0.0, 1000.0),
    (1.0, 2.0),
    (10.0, 11.0),
    (100.0, 101.0),
    (1000.0, 1001.0),
];

/// Which independent family of sets to draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    fn domain(self) -> u64 {
        match self {
            Split::Train => 0x5eed_0000_0000_0001,
            Split::Validation => 0x5eed_0000_0000_0002,
            Split::Test => 0x5eed_0000_0000_0003,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SortTaskConfig {
    pub n: usize,
    pub train_interval: (f64, f64),
    pub eval_intervals: Vec<(f64, f64)>,
    pub train_sets: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SortTaskConfig {
    fn default() -> Self {
        Self {
            n: 5,
            train_interval: (0.0, 1.0),
            eval_intervals: EVAL_INTERVALS.to_vec(),
            train_sets: 1 << 14,
            batch_size: 512,
            seed: 0,
        }
    }
}

impl SortTaskConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.train_interval;
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("train interval [{lo}, {hi}] is empty")));
        }
        if let Some((lo, hi)) = self.eval_intervals.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument(format!("eval interval [{lo}, {hi}] is empty")));
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument("set size must be >= 2".into()));
        }
        if self.train_sets == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("train sets and batch size must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of batches that cover the training set once.
    pub fn batches_per_epoch(&self) -> usize {
        self.train_sets.div_ceil(self.batch_size)
    }
}

/// One unordered set (N×1) and its ascending target.
#[derive(Clone, Debug, PartialEq)]
pub struct SortExample {
    pub input: DenseMatrix,
    pub target: DenseMatrix,
}

pub fn sort_example(seed: u64, split: Split, index: u64, n: usize, interval: (f64, f64)) -> SortExample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ split.domain());
    rng.set_stream(index);
    let (lo, hi) = interval;
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    SortExample {
        input: DenseMatrix::column(&values),
        target: DenseMatrix::column(&sorted),
    }
}

/// Training batch `batch_index`; the training set is `train_sets` fixed sets
/// visited in order and wrapped around at the end of each epoch.
pub fn gen_sort_batch(cfg: &SortTaskConfig, batch_index: u64) -> Vec<SortExample> {
    let start = batch_index as usize * cfg.batch_size;
    (0..cfg.batch_size)
        .map(|j| {
            let set = ((start + j) % cfg.train_sets) as u64;
            sort_example(cfg.seed, Split::Train, set, cfg.n, cfg.train_interval)
        })
        .collect()
}

/// `count` held-out sets drawn from `interval`.
pub fn gen_eval_sets(
    seed: u64,
    split: Split,
    n: usize,
    interval: (f64, f64),
    count: usize,
) -> Vec<SortExample> {
    (0..count as u64)
        .map(|i| sort_example(seed, split, i, n, interval))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_batches() {
        let cfg = SortTaskConfig { batch_size: 8, ..Default::default() };
        assert_eq!(gen_sort_batch(&cfg, 3), gen_sort_batch(&cfg, 3));
        assert_ne!(gen_sort_batch(&cfg, 3), gen_sort_batch(&cfg, 4));
    }

    #[test]
    fn targets_ascending() {
        let cfg = SortTaskConfig { batch_size: 16, n: 9, ..Default::default() };
        for ex in gen_sort_batch(&cfg, 0) {
            let t = ex.target.data();
            assert!(t.windows(2).all(|w| w[0] <= w[1]));
            let mut lib = ex.input.data().to_vec();
            lib.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(lib, t);
        }
    }

    #[test]
    fn wraps_training_set() {
        let cfg = SortTaskConfig { batch_size: 4, train_sets: 8, ..Default::default() };
        assert_eq!(gen_sort_batch(&cfg, 0), gen_sort_batch(&cfg, 2));
        assert_eq!(cfg.batches_per_epoch(), 2);
    }

    #[test]
    fn splits_are_independent() {
        let a = sort_example(1, Split::Train, 0, 5, (0.0, 1.0));
        let b = sort_example(1, Split::Test, 0, 5, (0.0, 1.0));
        assert_ne!(a, b);
    }

    #[test]
    fn intervals_respected() {
        for &(lo, hi) in &EVAL_INTERVALS {
            for ex in gen_eval_sets(2, Split::Test, 20, (lo, hi), 10) {
                assert!(ex.input.data().iter().all(|&v| v >= lo && v < hi));
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(SortTaskConfig { n: 1, ..Default::default() }.validate().is_err());
        assert!(SortTaskConfig { train_interval: (1.0, 1.0), ..Default::default() }.validate().is_err());
        assert!(SortTaskConfig::default().validate().is_ok());
    }
}
