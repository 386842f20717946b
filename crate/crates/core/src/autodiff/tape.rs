use super::kernels;
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    MatMul(Var, Var),
    /// rhs shape is a suffix of lhs shape and is broadcast over the rest.
    Add(Var, Var),
    /// Same broadcasting as `Add`.
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Gelu(Var),
    Sum(Var),
    Mean(Var),
    MeanAxis {
        input: Var,
        axis: usize,
    },
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Reshape(Var),
    /// out[i] = input[index[i]]
    Gather {
        input: Var,
        index: Vec<usize>,
    },
    Softmax(Var),
    LayerNorm {
        input: Var,
        eps: f64,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    },
    AvgPool2d {
        input: Var,
        size: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub(crate) value: Tensor,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
}

/// Eager reverse-mode tape.
///
/// Operations execute immediately and append a node holding their output
/// and the operand handles needed by the backward rule. Nodes are stored in
/// creation order, which is a valid topological order, so `backward`
/// replays them in reverse.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub(crate) fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub(crate) fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Accumulated gradient of the last `backward` call(s) for `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient for `v`, or zeros shaped like `v` if nothing reached it.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(self.shape(v)))
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Back-propagates from a scalar `loss`, adding into existing gradients.
    ///
    /// Every leaf that requires a gradient ends up with a buffer, zero if
    /// the loss does not depend on it.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = &self.nodes[loss.0].value;
        if !root.is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                root.shape()
            )));
        }
        let mut pending: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        pending[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = pending[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            for (target, contrib) in self.backprop_node(i, &g) {
                if !self.nodes[target.0].requires_grad {
                    continue;
                }
                accumulate(&mut pending[target.0], contrib);
            }
            if matches!(node.op, Op::Leaf) {
                accumulate(&mut self.grads[i], g);
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) && self.grads[i].is_none() {
                self.grads[i] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(())
    }

    fn val(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn backprop_node(&self, i: usize, g: &Tensor) -> Vec<(Var, Tensor)> {
        let node = &self.nodes[i];
        let out = &node.value;
        let gd = g.data();
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                let (da, db) = kernels::matmul_backward(av, bv, g);
                vec![(*a, da), (*b, db)]
            }
            Op::Add(a, b) => {
                let bv = self.val(*b);
                let mut db = vec![0.0; bv.len()];
                let n = bv.len();
                for (j, v) in gd.iter().enumerate() {
                    db[j % n] += v;
                }
                vec![
                    (*a, g.clone()),
                    (*b, Tensor::from_parts(bv.shape().to_vec(), db)),
                ]
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                let (ad, bd) = (av.data(), bv.data());
                let n = bd.len();
                let da = gd.iter().enumerate().map(|(j, g)| g * bd[j % n]).collect();
                let mut db = vec![0.0; n];
                for (j, g) in gd.iter().enumerate() {
                    db[j % n] += g * ad[j];
                }
                vec![
                    (*a, Tensor::from_parts(av.shape().to_vec(), da)),
                    (*b, Tensor::from_parts(bv.shape().to_vec(), db)),
                ]
            }
            Op::Scale(a, c) => vec![(*a, g.map(|v| v * c))],
            Op::Relu(a) => {
                let x = self.val(*a);
                let d = zip_map(gd, x.data(), |g, x| if x > 0.0 { g } else { 0.0 });
                vec![(*a, Tensor::from_parts(x.shape().to_vec(), d))]
            }
            Op::Gelu(a) => {
                let x = self.val(*a);
                let d = zip_map(gd, x.data(), |g, x| g * kernels::gelu_grad(x));
                vec![(*a, Tensor::from_parts(x.shape().to_vec(), d))]
            }
            Op::Sum(a) => {
                let s = gd[0];
                vec![(*a, Tensor::full(self.val(*a).shape(), s))]
            }
            Op::Mean(a) => {
                let x = self.val(*a);
                let s = gd[0] / x.len() as f64;
                vec![(*a, Tensor::full(x.shape(), s))]
            }
            Op::MeanAxis { input, axis } => {
                let x = self.val(*input);
                let shape = x.shape();
                let outer: usize = shape[..*axis].iter().product();
                let len = shape[*axis];
                let inner: usize = shape[axis + 1..].iter().product();
                let mut d = vec![0.0; x.len()];
                let scale = 1.0 / len as f64;
                for o in 0..outer {
                    for k in 0..len {
                        for j in 0..inner {
                            d[(o * len + k) * inner + j] = gd[o * inner + j] * scale;
                        }
                    }
                }
                vec![(*input, Tensor::from_parts(shape.to_vec(), d))]
            }
            Op::Concat { inputs, axis } => {
                let sizes: Vec<usize> = inputs.iter().map(|v| self.val(*v).shape()[*axis]).collect();
                let parts = g.split(*axis, &sizes).expect("concat grad split");
                inputs.iter().copied().zip(parts).collect()
            }
            Op::Reshape(a) => {
                let shape = self.val(*a).shape().to_vec();
                vec![(*a, Tensor::from_parts(shape, gd.to_vec()))]
            }
            Op::Gather { input, index } => {
                let x = self.val(*input);
                let mut d = vec![0.0; x.len()];
                for (k, &src) in index.iter().enumerate() {
                    d[src] += gd[k];
                }
                vec![(*input, Tensor::from_parts(x.shape().to_vec(), d))]
            }
            Op::Softmax(a) => {
                let cols = *out.shape().last().unwrap();
                let y = out.data();
                let mut d = vec![0.0; y.len()];
                for r in 0..y.len() / cols {
                    let span = r * cols..(r + 1) * cols;
                    let dot: f64 = gd[span.clone()]
                        .iter()
                        .zip(&y[span.clone()])
                        .map(|(g, y)| g * y)
                        .sum();
                    for j in span {
                        d[j] = y[j] * (gd[j] - dot);
                    }
                }
                vec![(*a, Tensor::from_parts(out.shape().to_vec(), d))]
            }
            Op::LayerNorm { input, eps } => {
                let x = self.val(*input);
                let d = kernels::layer_norm_backward(x, out, g, *eps);
                vec![(*input, d)]
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let n = labels.len();
                let cols = probs.shape()[1];
                let scale = gd[0] / n as f64;
                let mut d: Vec<f64> = probs.data().iter().map(|p| p * scale).collect();
                for (r, &l) in labels.iter().enumerate() {
                    d[r * cols + l] -= scale;
                }
                vec![(*logits, Tensor::from_parts(probs.shape().to_vec(), d))]
            }
            Op::Conv2d {
                input,
                kernel,
                bias,
                stride,
                padding,
            } => {
                let (dx, dw, db) = kernels::conv2d_backward(
                    self.val(*input),
                    self.val(*kernel),
                    g,
                    *stride,
                    *padding,
                );
                vec![(*input, dx), (*kernel, dw), (*bias, db)]
            }
            Op::AvgPool2d { input, size } => {
                let dx = kernels::avg_pool2d_backward(self.val(*input), g, *size);
                vec![(*input, dx)]
            }
        }
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn accumulate(slot: &mut Option<Tensor>, contrib: Tensor) {
    match slot {
        Some(acc) => acc
            .data_mut()
            .iter_mut()
            .zip(contrib.data())
            .for_each(|(a, c)| *a += c),
        None => *slot = Some(contrib),
    }
}
