//! Hierarchical multi-task learning engine.
//!
//! Two-level (make → model) classification with single-task, parallel and
//! cascaded head architectures on top of a small tape-based autodiff core,
//! plus the training loop, hierarchy-aware metrics and a sweep harness.

pub mod arch;
pub mod autodiff;
pub mod data;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod train;

pub use autodiff::{Tape, Tensor, Var};
pub use error::{Error, Result};
