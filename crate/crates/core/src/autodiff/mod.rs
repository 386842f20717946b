//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.

pub mod gradcheck;
mod kernels;
mod ops;
mod tape;
mod tensor;

pub use tape::{Tape, Var};
pub use tensor::Tensor;
