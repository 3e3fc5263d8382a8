use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// A bijection from output positions to elements: `assignment[k]` is the
/// element placed at position `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HardPermutation {
    assignment: Vec<usize>,
}

impl HardPermutation {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let n = assignment.len();
        let mut seen = vec![false; n];
        for &a in &assignment {
            if a >= n || std::mem::replace(&mut seen[a], true) {
                return Err(Error::InvalidArgument(format!(
                    "{assignment:?} is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Self { assignment })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.assignment
    }

    /// Element index held at `position`.
    pub fn element_at(&self, position: usize) -> usize {
        self.assignment[position]
    }

    /// `inverse()[i]` is the position of element `i`.
    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (k, &i) in self.assignment.iter().enumerate() {
            inv[i] = k;
        }
        Self { assignment: inv }
    }

    /// Element-by-position 0/1 matrix: `P[i][k] = 1` iff element `i` sits at position `k`.
    pub fn to_matrix(&self) -> DenseMatrix {
        let n = self.len();
        let mut p = DenseMatrix::zeros(n, n);
        for (k, &i) in self.assignment.iter().enumerate() {
            p[(i, k)] = 1.0;
        }
        p
    }

    /// Output rows in position order.
    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        x.select_rows(&self.assignment)
    }

    /// `Σ_k cost[element_at(k)][k]` for an element-by-position cost matrix.
    pub fn cost(&self, cost: &DenseMatrix) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .map(|(k, &i)| cost[(i, k)])
            .sum()
    }
}

/// Minimum-cost linear assignment of rows (elements) to columns (positions).
///
/// Shortest augmenting path with row/column potentials, O(N³). Rows are
/// inserted in increasing index order and every minimum scan keeps the first
/// (lowest-index) candidate, so the result is fully deterministic.
pub fn hungarian(cost: &DenseMatrix) -> Result<HardPermutation> {
    cost.ensure_square("hungarian")?;
    cost.ensure_finite("hungarian")?;
    let n = cost.rows();
    if n == 0 {
        return Ok(HardPermutation::identity(0));
    }

    // 1-based arrays; column 0 is a virtual sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        row_of_col[0] = row;
        let mut col0 = 0;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = row_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = col0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            col0 = col1;
            if row_of_col[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            row_of_col[col0] = row_of_col[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    HardPermutation::new((1..=n).map(|j| row_of_col[j] - 1).collect())
}
