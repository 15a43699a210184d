//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] is built fresh for every step (define-by-run). Leaves are either
//! trainable parameters or constants; every other node records the op that
//! produced it, and [`Tape::backward`] walks the nodes once in reverse order.

mod fd;
mod tape;
mod tensor;

pub use fd::finite_diff_grad;
pub use tape::{Gradients, NodeId, OpKind, Tape};
pub use tensor::Tensor;
