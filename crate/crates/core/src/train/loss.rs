use crate::error::Result;
use crate::linalg::DenseMatrix;

/// Mean squared error over all entries and its gradient with respect to `y`.
pub fn mse_loss(y: &DenseMatrix, target: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let diff = y.sub(target)?;
    let count = diff.data().len().max(1) as f64;
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / count;
    Ok((loss, diff.scale(2.0 / count)))
}
