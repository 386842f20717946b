//! Differentiable operations. Each method computes its output eagerly and
//! records the node needed to back-propagate through it.

use super::kernels;
use super::tape::{Op, Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

impl Tape {
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = kernels::matmul(self.value(a), self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// Elementwise add; `b` may have a shape equal to a trailing suffix of
    /// `a`'s shape, in which case it is broadcast over the leading axes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(Error::dim("add", sa, sb));
        }
        let bd = self.value(b).data();
        let n = bd.len();
        let data = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + bd[i % n])
            .collect();
        let out = Tensor::from_parts(sa.to_vec(), data);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// Elementwise product with the same suffix broadcasting as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(Error::dim("mul", sa, sb));
        }
        let bd = self.value(b).data();
        let n = bd.len();
        let data = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x * bd[i % n])
            .collect();
        let out = Tensor::from_parts(sa.to_vec(), data);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|v| v * c);
        let rg = self.requires_grad(a);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        let rg = self.requires_grad(a);
        self.push(out, Op::Relu(a), rg)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(kernels::gelu);
        let rg = self.requires_grad(a);
        self.push(out, Op::Gelu(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.requires_grad(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let m = x.data().iter().sum::<f64>() / x.len() as f64;
        let rg = self.requires_grad(a);
        self.push(Tensor::scalar(m), Op::Mean(a), rg)
    }

    /// Mean over one axis, which is removed from the output shape.
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let x = self.value(a);
        let shape = x.shape();
        if axis >= shape.len() {
            return Err(Error::dim("mean_axis", shape, &[axis]));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let xd = x.data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..len {
                for j in 0..inner {
                    out[o * inner + j] += xd[(o * len + k) * inner + j];
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= len as f64);
        let mut out_shape = shape.to_vec();
        out_shape.remove(axis);
        let t = Tensor::from_parts(out_shape, out);
        let rg = self.requires_grad(a);
        Ok(self.push(t, Op::MeanAxis { input: a, axis }, rg))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let parts: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
        let out = Tensor::concat(&parts, axis)?;
        let rg = self.any_grad(inputs);
        Ok(self.push(
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape)?;
        let rg = self.requires_grad(a);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    /// Swaps the last two axes (rank 2 or 3).
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let (batch, r, c) = match shape.as_slice() {
            [r, c] => (1, *r, *c),
            [b, r, c] => (*b, *r, *c),
            _ => return Err(Error::dim("transpose", &shape, &[])),
        };
        let mut index = Vec::with_capacity(batch * r * c);
        for bi in 0..batch {
            for j in 0..c {
                for i in 0..r {
                    index.push(bi * r * c + i * c + j);
                }
            }
        }
        let mut out_shape = shape.clone();
        let rank = out_shape.len();
        out_shape.swap(rank - 2, rank - 1);
        Ok(self.gather(a, index, out_shape))
    }

    /// Splits `n×c×h×w` images into non-overlapping `p×p` patches, giving
    /// `n×t×(c·p·p)` tokens in row-major patch order.
    pub fn patchify(&mut self, a: Var, p: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let [n, c, h, w] = shape[..] else {
            return Err(Error::dim("patchify", &shape, &[p, p]));
        };
        if p == 0 || h % p != 0 || w % p != 0 {
            return Err(Error::dim("patchify", &shape, &[p, p]));
        }
        let (ph, pw) = (h / p, w / p);
        let t = ph * pw;
        let tok = c * p * p;
        let mut index = Vec::with_capacity(n * t * tok);
        for ni in 0..n {
            for py in 0..ph {
                for px in 0..pw {
                    for ci in 0..c {
                        for dy in 0..p {
                            for dx in 0..p {
                                index.push(((ni * c + ci) * h + py * p + dy) * w + px * p + dx);
                            }
                        }
                    }
                }
            }
        }
        Ok(self.gather(a, index, vec![n, t, tok]))
    }

    fn gather(&mut self, a: Var, index: Vec<usize>, shape: Vec<usize>) -> Var {
        let xd = self.value(a).data();
        let data = index.iter().map(|&i| xd[i]).collect();
        let out = Tensor::from_parts(shape, data);
        let rg = self.requires_grad(a);
        self.push(out, Op::Gather { input: a, index }, rg)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if !x.all_finite() {
            return Err(Error::Numeric { op: "softmax" });
        }
        let out = kernels::softmax_rows(x);
        let rg = self.requires_grad(a);
        Ok(self.push(out, Op::Softmax(a), rg))
    }

    /// Normalizes the last axis to zero mean and unit variance (no affine).
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Var {
        let out = kernels::layer_norm(self.value(a), eps);
        let rg = self.requires_grad(a);
        self.push(out, Op::LayerNorm { input: a, eps }, rg)
    }

    /// Mean cross-entropy of `n×C` logits against class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let x = self.value(logits);
        let [n, classes] = x.shape()[..] else {
            return Err(Error::dim("cross_entropy", x.shape(), &[labels.len()]));
        };
        if n != labels.len() {
            return Err(Error::dim("cross_entropy", x.shape(), &[labels.len()]));
        }
        if let Some((position, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::Label {
                position,
                label,
                classes,
            });
        }
        if !x.all_finite() {
            return Err(Error::Numeric { op: "cross_entropy" });
        }
        let mut total = 0.0;
        for (r, &l) in labels.iter().enumerate() {
            let row = x.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[l];
        }
        let probs = kernels::softmax_rows(x);
        let rg = self.requires_grad(logits);
        Ok(self.push(
            Tensor::scalar(total / n as f64),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    pub fn conv2d(&mut self, x: Var, kernel: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let out = kernels::conv2d(self.value(x), self.value(kernel), self.value(bias), stride, padding)?;
        let rg = self.any_grad(&[x, kernel, bias]);
        Ok(self.push(
            out,
            Op::Conv2d {
                input: x,
                kernel,
                bias,
                stride,
                padding,
            },
            rg,
        ))
    }

    /// Non-overlapping mean pooling with a `size×size` window.
    pub fn avg_pool2d(&mut self, x: Var, size: usize) -> Result<Var> {
        let out = kernels::avg_pool2d(self.value(x), size)?;
        let rg = self.requires_grad(x);
        Ok(self.push(out, Op::AvgPool2d { input: x, size }, rg))
    }
}
