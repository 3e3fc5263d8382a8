use crate::error::{shape_err, Result};
use crate::linalg::{hungarian, DenseMatrix, HardPermutation};
use crate::permopt::ComparisonStructure;

/// Metrics of one permuted set.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMetrics {
    /// Every position holds exactly the target content after rounding.
    pub exact: bool,
    pub mse_hard: f64,
    pub mse_soft: f64,
    pub kendall_tau: Option<f64>,
    pub assignment: HardPermutation,
}

/// Means over a collection of instances.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub count: usize,
    pub accuracy: f64,
    pub mse_hard: f64,
    pub mse_soft: f64,
    pub kendall_tau: Option<f64>,
}

impl Metrics {
    pub fn from_instances(items: &[InstanceMetrics]) -> Self {
        let n = items.len();
        if n == 0 {
            return Self::default();
        }
        let mean = |f: &dyn Fn(&InstanceMetrics) -> f64| items.iter().map(f).sum::<f64>() / n as f64;
        let taus: Vec<f64> = items.iter().filter_map(|m| m.kendall_tau).collect();
        Self {
            count: n,
            accuracy: mean(&|m| if m.exact { 1.0 } else { 0.0 }),
            mse_hard: mean(&|m| m.mse_hard),
            mse_soft: mean(&|m| m.mse_soft),
            kendall_tau: (taus.len() == n).then(|| taus.iter().sum::<f64>() / n as f64),
        }
    }
}

/// Rounds `p` with the Hungarian algorithm on `-p` and scores the result.
///
/// `x` holds the set in presentation order, `target` the rows in correct
/// position order. Kendall's tau is reported for sequence structures.
pub fn evaluate(
    p: &DenseMatrix,
    x: &DenseMatrix,
    target: &DenseMatrix,
    structure: &ComparisonStructure,
) -> Result<InstanceMetrics> {
    let n = x.rows();
    p.ensure_shape("evaluate", n, n)?;
    if target.shape() != x.shape() {
        return Err(shape_err(
            "evaluate",
            format!("{}x{}", x.rows(), x.cols()),
            format!("{}x{}", target.rows(), target.cols()),
        ));
    }
    let assignment = hungarian(&p.scale(-1.0))?;
    let hard = assignment.apply(x);
    let soft = p.matmul_tn(x)?;
    let mse = |y: &DenseMatrix| -> Result<f64> {
        let d = y.sub(target)?;
        Ok(d.data().iter().map(|v| v * v).sum::<f64>() / d.data().len().max(1) as f64)
    };
    let kendall_tau = match structure {
        ComparisonStructure::Sequence(_) => Some(kendall_tau(&target_positions(x, target), &assignment)),
        ComparisonStructure::Grid { .. } => None,
    };
    Ok(InstanceMetrics {
        exact: hard == *target,
        mse_hard: mse(&hard)?,
        mse_soft: mse(&soft)?,
        kendall_tau,
        assignment,
    })
}

/// Correct position of each element, matching equal rows in order.
fn target_positions(x: &DenseMatrix, target: &DenseMatrix) -> Vec<usize> {
    let n = x.rows();
    let mut taken = vec![false; n];
    let mut pos = vec![0; n];
    for (i, slot) in pos.iter_mut().enumerate() {
        let closest = (0..n)
            .filter(|&k| !taken[k])
            .min_by(|&a, &b| {
                let da = dist2(x.row(i), target.row(a));
                let db = dist2(x.row(i), target.row(b));
                da.total_cmp(&db)
            })
            .expect("one free position per element");
        taken[closest] = true;
        *slot = closest;
    }
    pos
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Tau between the produced order and the correct one, from the correct
/// position of the element placed at each output position.
fn kendall_tau(correct_pos: &[usize], assignment: &HardPermutation) -> f64 {
    let n = assignment.len();
    if n < 2 {
        return 1.0;
    }
    let ranks: Vec<usize> = assignment.as_slice().iter().map(|&e| correct_pos[e]).collect();
    let mut score = 0i64;
    for a in 0..n {
        for b in a + 1..n {
            score += if ranks[a] < ranks[b] { 1 } else { -1 };
        }
    }
    score as f64 / (n * (n - 1) / 2) as f64
}
