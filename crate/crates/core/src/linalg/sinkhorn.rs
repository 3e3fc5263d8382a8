//! Fixed-iteration Sinkhorn normalisation and its vector-Jacobian product.
//!
//! `S(M)` exponentiates every entry and then alternates `L` times between
//! normalising rows and normalising columns. The last stage is always a
//! column normalisation, so columns of the output sum to one up to rounding
//! while rows only approach one as `L` grows.

use crate::error::{shape_err, Error, Result};
use crate::linalg::DenseMatrix;

/// Default number of row/column normalisation rounds.
pub const DEFAULT_SINKHORN_ITERS: usize = 4;

/// Intermediates saved by [`sinkhorn`] for the backward pass.
#[derive(Clone, Debug)]
pub struct SinkhornCache {
    exp: DenseMatrix,
    stages: Vec<Stage>,
}

#[derive(Clone, Debug)]
struct Stage {
    row_sums: Vec<f64>,
    row_normed: DenseMatrix,
    col_sums: Vec<f64>,
    col_normed: DenseMatrix,
}

impl SinkhornCache {
    pub fn iterations(&self) -> usize {
        self.stages.len()
    }

    pub fn dim(&self) -> usize {
        self.exp.rows()
    }

    /// The row-stabilised exponential `exp(M_ij - max_k M_ik)`.
    pub fn exponentiated(&self) -> &DenseMatrix {
        &self.exp
    }

    pub fn row_stage(&self, l: usize) -> &DenseMatrix {
        &self.stages[l].row_normed
    }

    pub fn col_stage(&self, l: usize) -> &DenseMatrix {
        &self.stages[l].col_normed
    }

    /// The operator output (last column stage).
    pub fn output(&self) -> &DenseMatrix {
        &self.stages.last().expect("at least one stage").col_normed
    }
}

/// Runs `iters` rounds of Sinkhorn normalisation on `exp(m)`.
pub fn sinkhorn(m: &DenseMatrix, iters: usize) -> Result<(DenseMatrix, SinkhornCache)> {
    m.ensure_square("sinkhorn")?;
    m.ensure_finite("sinkhorn")?;
    if iters == 0 {
        return Err(Error::InvalidArgument(
            "sinkhorn needs at least one iteration".into(),
        ));
    }
    let n = m.rows();

    // Per-row max subtraction; the following row normalisation cancels it exactly.
    let mut exp = m.clone();
    for i in 0..n {
        let row = exp.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
    }

    let mut stages = Vec::with_capacity(iters);
    let mut current = exp.clone();
    for _ in 0..iters {
        let row_sums: Vec<f64> = (0..n).map(|i| current.row(i).iter().sum()).collect();
        for (i, s) in row_sums.iter().enumerate() {
            current.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
        let row_normed = current.clone();

        let col_sums = column_sums(&current);
        for i in 0..n {
            for (v, s) in current.row_mut(i).iter_mut().zip(&col_sums) {
                *v /= s;
            }
        }
        stages.push(Stage {
            row_sums,
            row_normed,
            col_sums,
            col_normed: current.clone(),
        });
    }

    if !current.is_finite() {
        return Err(Error::NonFinite { op: "sinkhorn" });
    }
    Ok((current, SinkhornCache { exp, stages }))
}

/// Gradient of `⟨upstream, S(M)⟩` with respect to `M`.
pub fn sinkhorn_vjp(cache: &SinkhornCache, upstream: &DenseMatrix) -> Result<DenseMatrix> {
    let n = cache.dim();
    if upstream.shape() != (n, n) {
        return Err(shape_err(
            "sinkhorn_vjp",
            format!("{n}x{n}"),
            format!("{}x{}", upstream.rows(), upstream.cols()),
        ));
    }

    let mut grad = upstream.clone();
    for stage in cache.stages.iter().rev() {
        // Y = Z / colsum(Z):  dZ_ij = (dY_ij - Σ_u dY_uj Y_uj) / s_j
        let y = &stage.col_normed;
        let mut proj = vec![0.0; n];
        for i in 0..n {
            for ((p, &g), &yv) in proj.iter_mut().zip(grad.row(i)).zip(y.row(i)) {
                *p += g * yv;
            }
        }
        for i in 0..n {
            let row = grad.row_mut(i);
            for j in 0..n {
                row[j] = (row[j] - proj[j]) / stage.col_sums[j];
            }
        }

        // Y = Z / rowsum(Z):  dZ_ij = (dY_ij - Σ_v dY_iv Y_iv) / s_i
        let y = &stage.row_normed;
        for i in 0..n {
            let proj: f64 = grad.row(i).iter().zip(y.row(i)).map(|(g, v)| g * v).sum();
            let s = stage.row_sums[i];
            grad.row_mut(i).iter_mut().for_each(|g| *g = (*g - proj) / s);
        }
    }

    // exp stage; the row-max shift contributes nothing because the first row
    // normalisation removes any per-row scale.
    for (g, &e) in grad.data_mut().iter_mut().zip(cache.exp.data()) {
        *g *= e;
    }
    Ok(grad)
}

fn column_sums(m: &DenseMatrix) -> Vec<f64> {
    let mut sums = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (s, v) in sums.iter_mut().zip(m.row(i)) {
            *s += v;
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-scale..scale))
    }

    fn row_dev(p: &DenseMatrix) -> f64 {
        (0..p.rows())
            .map(|i| (p.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn col_dev(p: &DenseMatrix) -> f64 {
        let t = p.transpose();
        row_dev(&t)
    }

    #[test]
    fn zeros_give_uniform() {
        let (p, cache) = sinkhorn(&DenseMatrix::zeros(2, 2), 4).unwrap();
        assert!(p.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert_eq!(cache.iterations(), 4);
    }

    #[test]
    fn single_pass_by_hand() {
        let l2 = 2f64.ln();
        let m = DenseMatrix::from_rows(&[[l2, 0.0], [0.0, l2]]).unwrap();
        let (p, _) = sinkhorn(&m, 1).unwrap();
        let want = [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0];
        for (a, b) in p.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn strong_diagonal_saturates() {
        let m = DenseMatrix::from_rows(&[[10.0, 0.0], [0.0, 10.0]]).unwrap();
        let (p, _) = sinkhorn(&m, 4).unwrap();
        assert!(p[(0, 0)] >= 0.99 && p[(1, 1)] >= 0.99);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            sinkhorn(&DenseMatrix::zeros(2, 3), 4),
            Err(Error::NotSquare { .. })
        ));
        let mut m = DenseMatrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(sinkhorn(&m, 4), Err(Error::NonFinite { .. })));
        assert!(sinkhorn(&DenseMatrix::zeros(2, 2), 0).is_err());
    }

    #[test]
    fn columns_exact_rows_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=8 {
            let m = random(n, 10.0, &mut rng);
            let (p, _) = sinkhorn(&m, 4).unwrap();
            assert!(col_dev(&p) < 1e-12);
            assert!(p.data().iter().all(|&v| v > 0.0));
            // Row sums close in on one as the iteration count grows.
            let (p_long, _) = sinkhorn(&m, 400).unwrap();
            assert!(row_dev(&p_long) <= row_dev(&p) + 1e-12);
        }
        // Small-magnitude inputs are already balanced after four rounds.
        for n in 2..=8 {
            let (p, _) = sinkhorn(&random(n, 0.1, &mut rng), 4).unwrap();
            assert!(row_dev(&p) < 1e-6);
        }
    }

    #[test]
    fn vjp_zero_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (_, cache) = sinkhorn(&random(3, 1.0, &mut rng), 4).unwrap();
        let g = sinkhorn_vjp(&cache, &DenseMatrix::zeros(3, 3)).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert!(sinkhorn_vjp(&cache, &DenseMatrix::zeros(2, 2)).is_err());
    }
}
