//! Dense matrices, Sinkhorn normalisation and linear assignment.

mod hungarian;
mod matrix;
mod sinkhorn;

pub use hungarian::{hungarian, HardPermutation};
pub use matrix::DenseMatrix;
pub(crate) use matrix::dot;
pub use sinkhorn::{sinkhorn, sinkhorn_vjp, SinkhornCache, DEFAULT_SINKHORN_ITERS};
