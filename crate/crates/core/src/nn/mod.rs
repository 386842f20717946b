//! Parameterized layers and regularizers.
//!
//! Layers own plain [`Tensor`] parameters. A forward pass first *binds* a
//! layer onto a tape, recording each parameter as a trainable leaf, and the
//! bound handle then runs the computation. `Bound*::vars()` and
//! [`Parameterized::params_mut`] list parameters in the same declaration
//! order, which is how optimizer updates find their gradients.

mod attention;
mod conv;
mod dense;
mod dropout;

pub use attention::{AttentionBlock, AttentionOutput, BoundAttention};
pub use conv::{BoundConv2d, Conv2dLayer};
pub use dense::{BoundDense, DenseLayer};
pub use dropout::{DropoutSpec, Phase};

use rand::Rng;

use crate::autodiff::Tensor;

pub trait Parameterized {
    fn params(&self) -> Vec<&Tensor>;

    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn parameter_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}

/// Uniform in `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.random_range(-limit..=limit);
    }
    t
}
