use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
}

/// Inverted dropout: survivors are scaled by `1/(1-p)` during training so
/// evaluation is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    rate: f64,
}

impl DropoutSpec {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn is_identity(&self, phase: Phase) -> bool {
        self.rate == 0.0 || phase == Phase::Eval
    }

    /// Applies the mask; returns `x` itself when the transform is the
    /// identity, without consuming randomness.
    pub fn forward(&self, tape: &mut Tape, x: Var, phase: Phase, rng: &mut impl Rng) -> Result<Var> {
        if self.is_identity(phase) {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mut mask = Tensor::zeros(tape.shape(x));
        for m in mask.data_mut() {
            *m = if rng.random::<f64>() < self.rate { 0.0 } else { keep };
        }
        let mask = tape.constant(mask);
        tape.mul(x, mask)
    }
}
