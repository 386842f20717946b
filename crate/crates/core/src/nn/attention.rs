use rand::Rng;

use super::{DenseLayer, Parameterized};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

/// Single-head self-attention block with pre-layer-norm and a residual
/// connection: `x + O(softmax(QKᵀ/√d)·V)` where Q, K, V read `LN(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBlock {
    ln_scale: Tensor,
    ln_shift: Tensor,
    query: DenseLayer,
    key: DenseLayer,
    value: DenseLayer,
    output: DenseLayer,
}

impl AttentionBlock {
    pub fn new(model_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            ln_scale: Tensor::ones(&[model_dim]),
            ln_shift: Tensor::zeros(&[model_dim]),
            query: DenseLayer::new(model_dim, model_dim, rng),
            key: DenseLayer::new(model_dim, model_dim, rng),
            value: DenseLayer::new(model_dim, model_dim, rng),
            output: DenseLayer::new(model_dim, model_dim, rng),
        }
    }

    pub fn model_dim(&self) -> usize {
        self.ln_scale.len()
    }

    /// Multiply-accumulates for `tokens` tokens: four projections plus the
    /// score and context products.
    pub fn flops(&self, tokens: usize) -> u64 {
        let d = self.model_dim();
        (4 * tokens * d * d + 2 * tokens * tokens * d) as u64
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundAttention {
        BoundAttention {
            ln_scale: tape.param(self.ln_scale.clone()),
            ln_shift: tape.param(self.ln_shift.clone()),
            query: self.query.bind(tape),
            key: self.key.bind(tape),
            value: self.value.bind(tape),
            output: self.output.bind(tape),
            model_dim: self.model_dim(),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<AttentionOutput> {
        self.bind(tape).forward(tape, x)
    }
}

impl Parameterized for AttentionBlock {
    fn params(&self) -> Vec<&Tensor> {
        let mut p = vec![&self.ln_scale, &self.ln_shift];
        for layer in [&self.query, &self.key, &self.value, &self.output] {
            p.extend(layer.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = vec![&mut self.ln_scale, &mut self.ln_shift];
        p.extend(self.query.params_mut());
        p.extend(self.key.params_mut());
        p.extend(self.value.params_mut());
        p.extend(self.output.params_mut());
        p
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionOutput {
    pub output: Var,
    /// `n×t×t` attention weights; each row sums to one.
    pub weights: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundAttention {
    ln_scale: Var,
    ln_shift: Var,
    query: super::BoundDense,
    key: super::BoundDense,
    value: super::BoundDense,
    output: super::BoundDense,
    model_dim: usize,
}

impl BoundAttention {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<AttentionOutput> {
        let shape = tape.shape(x);
        if shape.len() != 3 || shape[2] != self.model_dim {
            return Err(Error::dim("attention", shape, &[self.model_dim]));
        }
        let normed = tape.layer_norm(x, LN_EPS);
        let normed = tape.mul(normed, self.ln_scale)?;
        let normed = tape.add(normed, self.ln_shift)?;

        let q = self.query.forward(tape, normed)?;
        let k = self.key.forward(tape, normed)?;
        let v = self.value.forward(tape, normed)?;
        let kt = tape.transpose(k)?;
        let scores = tape.matmul(q, kt)?;
        let scores = tape.scale(scores, 1.0 / (self.model_dim as f64).sqrt());
        let weights = tape.softmax(scores)?;
        let context = tape.matmul(weights, v)?;
        let projected = self.output.forward(tape, context)?;
        let output = tape.add(x, projected)?;
        Ok(AttentionOutput { output, weights })
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut v = vec![self.ln_scale, self.ln_shift];
        for layer in [&self.query, &self.key, &self.value, &self.output] {
            v.extend(layer.vars());
        }
        v
    }
}
