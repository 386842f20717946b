use rand::Rng;

use super::{glorot_uniform, Parameterized};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// 2-D cross-correlation layer over `n×c×h×w` input.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dLayer {
    kernels: Tensor,
    bias: Tensor,
    stride: usize,
    padding: usize,
}

impl Conv2dLayer {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if stride == 0 || kernel == 0 {
            return Err(Error::Config("conv kernel and stride must be positive".into()));
        }
        let area = kernel * kernel;
        Ok(Self {
            kernels: glorot_uniform(&[out_ch, in_ch, kernel, kernel], in_ch * area, out_ch * area, rng),
            bias: Tensor::zeros(&[out_ch]),
            stride,
            padding,
        })
    }

    pub fn from_parts(kernels: Tensor, bias: Tensor, stride: usize, padding: usize) -> Result<Self> {
        if kernels.rank() != 4 || bias.shape() != [kernels.shape()[0]] {
            return Err(Error::dim("conv2d", kernels.shape(), bias.shape()));
        }
        if stride == 0 {
            return Err(Error::Config("conv stride must be positive".into()));
        }
        Ok(Self {
            kernels,
            bias,
            stride,
            padding,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernels.shape()[2], self.kernels.shape()[3])
    }

    /// `floor((in + 2·padding − k)/stride) + 1`, or `None` if the kernel
    /// does not fit.
    pub fn output_extent(&self, input: usize, kernel: usize) -> Option<usize> {
        (input + 2 * self.padding)
            .checked_sub(kernel)
            .map(|span| span / self.stride + 1)
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (kh, kw) = self.kernel_size();
        Some((self.output_extent(h, kh)?, self.output_extent(w, kw)?))
    }

    /// Weight multiply-accumulates for one `h×w` input image.
    pub fn flops(&self, h: usize, w: usize) -> u64 {
        let (kh, kw) = self.kernel_size();
        self.output_hw(h, w)
            .map_or(0, |(oh, ow)| (oh * ow * self.out_channels() * self.in_channels() * kh * kw) as u64)
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundConv2d {
        BoundConv2d {
            kernels: tape.param(self.kernels.clone()),
            bias: tape.param(self.bias.clone()),
            stride: self.stride,
            padding: self.padding,
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        self.bind(tape).forward(tape, x)
    }
}

impl Parameterized for Conv2dLayer {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.kernels, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernels, &mut self.bias]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundConv2d {
    pub kernels: Var,
    pub bias: Var,
    stride: usize,
    padding: usize,
}

impl BoundConv2d {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.conv2d(x, self.kernels, self.bias, self.stride, self.padding)
    }

    pub fn vars(&self) -> Vec<Var> {
        vec![self.kernels, self.bias]
    }
}
