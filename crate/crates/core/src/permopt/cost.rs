use crate::error::{shape_err, Result};
use crate::linalg::DenseMatrix;
use crate::permopt::ComparisonStructure;

/// `c(P) = Σ_ch ⟨C_ch, P O_ch Pᵀ⟩`.
pub fn total_cost(
    costs: &[DenseMatrix],
    p: &DenseMatrix,
    structure: &ComparisonStructure,
) -> Result<f64> {
    let orders = structure.order_matrices();
    check(costs, p, structure)?;
    let mut total = 0.0;
    for (c, o) in costs.iter().zip(&orders) {
        let relative = p.matmul(o)?.matmul_nt(p)?;
        total += c.inner(&relative)?;
    }
    Ok(total)
}

/// `∂c/∂P = Σ_ch 2 C_ch B_ch` with `B_ch = P O_chᵀ`.
pub fn cost_gradient(
    costs: &[DenseMatrix],
    p: &DenseMatrix,
    structure: &ComparisonStructure,
) -> Result<DenseMatrix> {
    check(costs, p, structure)?;
    gradient_with_orders(costs, p, structure, &structure.order_matrices())
}

pub(crate) fn gradient_with_orders(
    costs: &[DenseMatrix],
    p: &DenseMatrix,
    structure: &ComparisonStructure,
    orders: &[DenseMatrix],
) -> Result<DenseMatrix> {
    let n = p.rows();
    let mut g = DenseMatrix::zeros(n, n);
    for (c, o) in costs.iter().zip(orders) {
        let b = match structure {
            ComparisonStructure::Sequence(_) => sequence_offsets(p),
            ComparisonStructure::Grid { .. } => p.matmul_nt(o)?,
        };
        g.axpy(2.0, &c.matmul(&b)?)?;
    }
    Ok(g)
}

/// `B_jq = Σ_{k'>q} P_jk' - Σ_{k'<q} P_jk'` via running prefix sums.
pub fn sequence_offsets(p: &DenseMatrix) -> DenseMatrix {
    let n = p.cols();
    let mut b = DenseMatrix::zeros(p.rows(), n);
    for j in 0..p.rows() {
        let row = p.row(j);
        let total: f64 = row.iter().sum();
        let mut before = 0.0;
        let out = b.row_mut(j);
        for q in 0..n {
            let after = total - before - row[q];
            out[q] = after - before;
            before += row[q];
        }
    }
    b
}

fn check(costs: &[DenseMatrix], p: &DenseMatrix, structure: &ComparisonStructure) -> Result<()> {
    let n = structure.positions();
    if costs.len() != structure.channels() {
        return Err(shape_err(
            "total_cost",
            format!("{} cost channels", structure.channels()),
            costs.len(),
        ));
    }
    p.ensure_shape("total_cost", n, n)?;
    for c in costs {
        c.ensure_shape("total_cost", n, n)?;
    }
    Ok(())
}
