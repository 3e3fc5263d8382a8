//! Learned pairwise ordering cost.
//!
//! A two-layer ReLU network `f` scores an ordered pair of elements. The
//! anti-symmetric comparison `F(a, b) = f(a, b) - f(b, a)` is evaluated for
//! every pair and each output channel is scaled to unit Frobenius norm,
//! giving one ordering-cost matrix per channel (one for sequences, a row and
//! a column channel for grids).

use crate::error::{shape_err, Error, Result};
use crate::linalg::{dot, DenseMatrix};

/// Guard on the Frobenius normalisation of an all-zero raw cost.
pub const NORM_EPS: f64 = 1e-12;

/// Weights of the comparison network `f([a; b]) = W2 · relu(W1 · [a; b] + b1) + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderingCostParams {
    /// hidden × 2·feat_dim
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    /// channels × hidden
    pub w2: DenseMatrix,
    pub b2: Vec<f64>,
}

/// Gradients have the same layout as the parameters.
pub type OrderingCostGrads = OrderingCostParams;

impl OrderingCostParams {
    pub fn zeros(feat_dim: usize, hidden: usize, channels: usize) -> Self {
        Self {
            w1: DenseMatrix::zeros(hidden, 2 * feat_dim),
            b1: vec![0.0; hidden],
            w2: DenseMatrix::zeros(channels, hidden),
            b2: vec![0.0; channels],
        }
    }

    pub fn new(w1: DenseMatrix, b1: Vec<f64>, w2: DenseMatrix, b2: Vec<f64>) -> Result<Self> {
        let p = Self { w1, b1, w2, b2 };
        p.validate()?;
        Ok(p)
    }

    /// Scalar comparator with `f(a, b) = a`, so `F(a, b) = a - b`.
    pub fn scalar_identity() -> Self {
        Self {
            w1: DenseMatrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).expect("static shape"),
            b1: vec![0.0; 2],
            w2: DenseMatrix::from_rows(&[[1.0, -1.0]]).expect("static shape"),
            b2: vec![0.0],
        }
    }

    pub fn feat_dim(&self) -> usize {
        self.w1.cols() / 2
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn channels(&self) -> usize {
        self.w2.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.w1.rows();
        if self.w1.cols() % 2 != 0 || self.w1.cols() == 0 {
            return Err(shape_err(
                "OrderingCostParams",
                "even, non-zero W1 column count",
                self.w1.cols(),
            ));
        }
        if self.b1.len() != h {
            return Err(shape_err("OrderingCostParams.b1", h, self.b1.len()));
        }
        if self.w2.cols() != h {
            return Err(shape_err("OrderingCostParams.w2 cols", h, self.w2.cols()));
        }
        if self.b2.len() != self.w2.rows() {
            return Err(shape_err(
                "OrderingCostParams.b2",
                self.w2.rows(),
                self.b2.len(),
            ));
        }
        let finite = self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().chain(&self.b2).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                op: "OrderingCostParams",
            });
        }
        Ok(())
    }


    fn same_layout(&self, other: &Self) -> bool {
        self.w1.shape() == other.w1.shape() && self.w2.shape() == other.w2.shape()
    }
}

/// `f(xi, xj)`, one value per channel.
pub fn pairwise_f(params: &OrderingCostParams, xi: &[f64], xj: &[f64]) -> Result<Vec<f64>> {
    let d = params.feat_dim();
    if xi.len() != d || xj.len() != d {
        return Err(shape_err(
            "pairwise_f",
            format!("feature length {d}"),
            format!("{} and {}", xi.len(), xj.len()),
        ));
    }
    let hidden: Vec<f64> = (0..params.hidden())
        .map(|h| {
            let w = params.w1.row(h);
            (dot(&w[..d], xi) + dot(&w[d..], xj) + params.b1[h]).max(0.0)
        })
        .collect();
    Ok((0..params.channels())
        .map(|c| dot(params.w2.row(c), &hidden) + params.b2[c])
        .collect())
}

/// Forward intermediates of [`cost_matrix`].
#[derive(Clone, Debug)]
pub struct CostCache {
    x: DenseMatrix,
    params: OrderingCostParams,
    /// N² × hidden pre-activations, pair (i, j) at row i·N + j.
    pre: DenseMatrix,
    raw: Vec<DenseMatrix>,
    norms: Vec<f64>,
    normalised: Vec<DenseMatrix>,
}

impl CostCache {
    pub fn set_size(&self) -> usize {
        self.x.rows()
    }

    /// Un-normalised anti-symmetric costs per channel.
    pub fn raw(&self) -> &[DenseMatrix] {
        &self.raw
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn costs(&self) -> &[DenseMatrix] {
        &self.normalised
    }

    /// Post-activation hidden state for the ordered pair `(i, j)`.
    pub fn hidden(&self, i: usize, j: usize) -> Vec<f64> {
        let n = self.set_size();
        self.pre.row(i * n + j).iter().map(|v| v.max(0.0)).collect()
    }
}

/// Per-channel ordering-cost matrices `C` for the rows of `x`.
pub fn cost_matrix(
    params: &OrderingCostParams,
    x: &DenseMatrix,
) -> Result<(Vec<DenseMatrix>, CostCache)> {
    params.validate()?;
    let d = params.feat_dim();
    x.ensure_finite("cost_matrix")?;
    if x.cols() != d || x.rows() == 0 {
        return Err(shape_err(
            "cost_matrix",
            format!("N>=1 rows of {d} features"),
            format!("{}x{}", x.rows(), x.cols()),
        ));
    }
    let n = x.rows();
    let hidden = params.hidden();
    let channels = params.channels();

    // W1 · [xi; xj] splits into a left part on xi and a right part on xj.
    let (w_left, w_right) = split_w1(&params.w1);
    let left = x.matmul_nt(&w_left)?;
    let right = x.matmul_nt(&w_right)?;

    let mut pre = DenseMatrix::zeros(n * n, hidden);
    let mut f = vec![DenseMatrix::zeros(n, n); channels];
    let mut act = vec![0.0; hidden];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let row = pre.row_mut(i * n + j);
            for h in 0..hidden {
                row[h] = left[(i, h)] + right[(j, h)] + params.b1[h];
                act[h] = row[h].max(0.0);
            }
            for (c, fc) in f.iter_mut().enumerate() {
                fc[(i, j)] = dot(params.w2.row(c), &act) + params.b2[c];
            }
        }
    }

    let mut raw = Vec::with_capacity(channels);
    let mut norms = Vec::with_capacity(channels);
    let mut normalised = Vec::with_capacity(channels);
    for fc in &f {
        let ct = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                fc[(i, j)] - fc[(j, i)]
            }
        });
        let norm = order_free_norm(&ct);
        normalised.push(ct.scale(1.0 / norm.max(NORM_EPS)));
        norms.push(norm);
        raw.push(ct);
    }

    let cache = CostCache {
        x: x.clone(),
        params: params.clone(),
        pre,
        raw,
        norms,
        normalised: normalised.clone(),
    };
    Ok((normalised, cache))
}

/// Gradients of `Σ_c ⟨dC_c, C_c⟩` with respect to the network weights and the inputs.
pub fn cost_matrix_vjp(
    cache: &CostCache,
    d_cost: &[DenseMatrix],
) -> Result<(OrderingCostGrads, DenseMatrix)> {
    let n = cache.set_size();
    let params = &cache.params;
    let channels = params.channels();
    let hidden = params.hidden();
    let d = params.feat_dim();
    if d_cost.len() != channels {
        return Err(shape_err("cost_matrix_vjp", channels, d_cost.len()));
    }
    for dc in d_cost {
        dc.ensure_shape("cost_matrix_vjp", n, n)?;
    }

    // Through the normalisation: C = C̃ / ‖C̃‖  ⇒  dC̃ = (dC - C⟨dC, C⟩) / ‖C̃‖.
    // Guarded (all-zero) channels pass no gradient.
    let mut d_f = Vec::with_capacity(channels);
    for c in 0..channels {
        let norm = cache.norms[c];
        let mut d_raw = DenseMatrix::zeros(n, n);
        if norm > NORM_EPS {
            let cn = &cache.normalised[c];
            let proj = d_cost[c].inner(cn)?;
            d_raw = d_cost[c].clone();
            d_raw.axpy(-proj, cn)?;
            d_raw.scale_in_place(1.0 / norm);
        }
        // C̃_ij = f_ij - f_ji off the diagonal.
        d_f.push(DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                d_raw[(i, j)] - d_raw[(j, i)]
            }
        }));
    }

    let mut grads = OrderingCostParams::zeros(d, hidden, channels);
    let mut d_left = DenseMatrix::zeros(n, hidden);
    let mut d_right = DenseMatrix::zeros(n, hidden);
    let mut d_pre = vec![0.0; hidden];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pre = cache.pre.row(i * n + j);
            d_pre.iter_mut().for_each(|v| *v = 0.0);
            for (c, df) in d_f.iter().enumerate() {
                let g = df[(i, j)];
                if g == 0.0 {
                    continue;
                }
                grads.b2[c] += g;
                let w2 = params.w2.row(c);
                let dw2 = grads.w2.row_mut(c);
                for h in 0..hidden {
                    dw2[h] += g * pre[h].max(0.0);
                    d_pre[h] += g * w2[h];
                }
            }
            for h in 0..hidden {
                // ReLU subgradient at zero is zero.
                let g = if pre[h] > 0.0 { d_pre[h] } else { 0.0 };
                d_left[(i, h)] += g;
                d_right[(j, h)] += g;
                grads.b1[h] += g;
            }
        }
    }

    let (w_left, w_right) = split_w1(&params.w1);
    let dw_left = d_left.matmul_tn(&cache.x)?;
    let dw_right = d_right.matmul_tn(&cache.x)?;
    for h in 0..hidden {
        let row = grads.w1.row_mut(h);
        row[..d].copy_from_slice(dw_left.row(h));
        row[d..].copy_from_slice(dw_right.row(h));
    }
    let mut dx = d_left.matmul(&w_left)?;
    dx.axpy(1.0, &d_right.matmul(&w_right)?)?;
    Ok((grads, dx))
}

fn split_w1(w1: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let d = w1.cols() / 2;
    (
        DenseMatrix::from_fn(w1.rows(), d, |h, k| w1[(h, k)]),
        DenseMatrix::from_fn(w1.rows(), d, |h, k| w1[(h, d + k)]),
    )
}

/// Frobenius norm summed in ascending order of the squared entries, so the
/// result does not depend on how the elements are indexed.
fn order_free_norm(m: &DenseMatrix) -> f64 {
    let mut sq: Vec<f64> = m.data().iter().map(|v| v * v).collect();
    sq.sort_by(f64::total_cmp);
    sq.iter().sum::<f64>().sqrt()
}

impl OrderingCostParams {
    /// Largest absolute difference between two parameter sets of equal layout.
    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        if !self.same_layout(other) {
            return None;
        }
        let biases = self
            .b1
            .iter()
            .zip(&other.b1)
            .chain(self.b2.iter().zip(&other.b2))
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        Some(
            biases
                .max(self.w1.max_abs_diff(&other.w1)?)
                .max(self.w2.max_abs_diff(&other.w2)?),
        )
    }
}
