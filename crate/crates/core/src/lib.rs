//! Learning to permute sets into sequences and grids.
//!
//! A learned anti-symmetric comparison network scores every ordered pair of
//! set elements. A fixed number of gradient steps on the resulting total cost
//! over Sinkhorn-normalised soft assignments produces a soft permutation,
//! and the whole unrolled procedure is differentiated by hand so that the
//! comparison network can be trained from a loss on the permuted output.

pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod ordering;
pub mod permopt;
pub mod tasks;
pub mod train;

pub use error::{Error, Result};
pub use linalg::{hungarian, sinkhorn, sinkhorn_vjp, DenseMatrix, HardPermutation, SinkhornCache};
pub use ordering::{cost_matrix, cost_matrix_vjp, pairwise_f, CostCache, OrderingCostParams};
pub use permopt::{
    cost_gradient, po_backward, po_forward, total_cost, ComparisonStructure, InitMode, InitParams,
    PoConfig, PoGrads, PoTrace,
};
