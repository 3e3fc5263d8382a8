//! Permutation optimisation: total cost over soft assignments, its gradient,
//! and the unrolled gradient-descent inner loop with its reverse pass.

mod cost;
mod structure;
mod unroll;

pub use cost::{cost_gradient, sequence_offsets, total_cost};
pub use structure::ComparisonStructure;
pub use unroll::{
    init_assignment, po_backward, po_forward, po_forward_with, InitMode, InitParams, InnerUpdate,
    PoConfig, PoGrads, PoTrace,
};
