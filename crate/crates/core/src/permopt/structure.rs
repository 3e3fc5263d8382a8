use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Target layout of the output: a sequence or a row-major grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComparisonStructure {
    Sequence(usize),
    Grid { rows: usize, cols: usize },
}

impl ComparisonStructure {
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid must be non-empty, got {rows}x{cols}"
            )));
        }
        Ok(Self::Grid { rows, cols })
    }

    /// Number of output positions.
    pub fn positions(&self) -> usize {
        match *self {
            Self::Sequence(n) => n,
            Self::Grid { rows, cols } => rows * cols,
        }
    }

    /// Number of cost channels: 1 for sequences, 2 (row, column) for grids.
    pub fn channels(&self) -> usize {
        match self {
            Self::Sequence(_) => 1,
            Self::Grid { .. } => 2,
        }
    }

    /// Relative-order sign `O[k][k']` for each channel.
    ///
    /// Sequence: `sign(k' - k)`. Grid row channel: `sign(col(k') - col(k))`
    /// between positions sharing a row; column channel: `sign(row(k') - row(k))`
    /// between positions sharing a column; zero otherwise.
    pub fn order_matrices(&self) -> Vec<DenseMatrix> {
        fn sign(a: usize, b: usize) -> f64 {
            match b.cmp(&a) {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Less => -1.0,
                std::cmp::Ordering::Equal => 0.0,
            }
        }
        match *self {
            Self::Sequence(n) => vec![DenseMatrix::from_fn(n, n, sign)],
            Self::Grid { rows: _, cols } => {
                let n = self.positions();
                let at = |k: usize| (k / cols, k % cols);
                let row_channel = DenseMatrix::from_fn(n, n, |k, kk| {
                    let ((r, c), (rr, cc)) = (at(k), at(kk));
                    if r == rr {
                        sign(c, cc)
                    } else {
                        0.0
                    }
                });
                let col_channel = DenseMatrix::from_fn(n, n, |k, kk| {
                    let ((r, c), (rr, cc)) = (at(k), at(kk));
                    if c == cc {
                        sign(r, rr)
                    } else {
                        0.0
                    }
                });
                vec![row_channel, col_channel]
            }
        }
    }
}
