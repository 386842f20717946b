use rand::Rng;

use super::{glorot_uniform, Parameterized};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Fully-connected layer `y = x·W + b` with `W: in×out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weight: Tensor,
    bias: Tensor,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: glorot_uniform(&[in_dim, out_dim], in_dim, out_dim, rng),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        match (weight.shape(), bias.shape()) {
            ([_, o], [b]) if o == b => Ok(Self { weight, bias }),
            (w, b) => Err(Error::dim("dense", w, b)),
        }
    }

    /// `W = I`, `b = 0`.
    pub fn identity(dim: usize) -> Self {
        Self {
            weight: Tensor::eye(dim),
            bias: Tensor::zeros(&[dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    /// Multiply-accumulates of the weight matrix for `rows` input rows.
    pub fn flops(&self, rows: usize) -> u64 {
        (rows * self.in_dim() * self.out_dim()) as u64
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundDense {
        BoundDense {
            weight: tape.param(self.weight.clone()),
            bias: tape.param(self.bias.clone()),
            in_dim: self.in_dim(),
        }
    }

    /// Binds and applies in one go; gradients of the bound parameters are
    /// then only reachable through the tape's leaf order.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        self.bind(tape).forward(tape, x)
    }
}

impl Parameterized for DenseLayer {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundDense {
    pub weight: Var,
    pub bias: Var,
    in_dim: usize,
}

impl BoundDense {
    /// Accepts `n×in` or `n×t×in` input.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let shape = tape.shape(x);
        if shape.len() < 2 || *shape.last().unwrap() != self.in_dim {
            return Err(Error::dim("dense", shape, tape.shape(self.weight)));
        }
        let xw = tape.matmul(x, self.weight)?;
        tape.add(xw, self.bias)
    }

    pub fn vars(&self) -> Vec<Var> {
        vec![self.weight, self.bias]
    }
}
