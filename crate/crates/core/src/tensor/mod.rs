//! Dense tensors and a tape-based reverse-mode differentiation engine.

mod dense;
mod gradcheck;
mod graph;
mod ops;
mod scalar;

pub(crate) use dense::check_shape;
pub use dense::{Init, Tensor};
pub use gradcheck::grad_check;
pub(crate) use graph::Backward;
pub use graph::{Graph, Var};
pub use ops::{EwiseKind, ReduceKind};
pub use scalar::Scalar;
