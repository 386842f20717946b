//! Raw numeric kernels shared by the forward ops and their backward rules.

use super::Tensor;
use crate::error::{Error, Result};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Batch layout of a matmul: `batch` blocks of `r×k · k×c`; `b_batched`
/// tells whether rhs has its own block per batch or is shared.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MatMulDims {
    pub batch: usize,
    pub r: usize,
    pub k: usize,
    pub c: usize,
    pub b_batched: bool,
}

pub(crate) fn matmul_dims(a: &[usize], b: &[usize]) -> Result<MatMulDims> {
    let err = || Error::dim("matmul", a, b);
    match (a.len(), b.len()) {
        (2, 2) if a[1] == b[0] => Ok(MatMulDims {
            batch: 1,
            r: a[0],
            k: a[1],
            c: b[1],
            b_batched: false,
        }),
        (3, 2) if a[2] == b[0] => Ok(MatMulDims {
            batch: a[0],
            r: a[1],
            k: a[2],
            c: b[1],
            b_batched: false,
        }),
        (3, 3) if a[0] == b[0] && a[2] == b[1] => Ok(MatMulDims {
            batch: a[0],
            r: a[1],
            k: a[2],
            c: b[2],
            b_batched: true,
        }),
        _ => Err(err()),
    }
}

pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let d = matmul_dims(a.shape(), b.shape())?;
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; d.batch * d.r * d.c];
    for bi in 0..d.batch {
        let ab = &ad[bi * d.r * d.k..(bi + 1) * d.r * d.k];
        let bb = if d.b_batched {
            &bd[bi * d.k * d.c..(bi + 1) * d.k * d.c]
        } else {
            bd
        };
        let ob = &mut out[bi * d.r * d.c..(bi + 1) * d.r * d.c];
        for i in 0..d.r {
            for p in 0..d.k {
                let x = ab[i * d.k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &bb[p * d.c..(p + 1) * d.c];
                let orow = &mut ob[i * d.c..(i + 1) * d.c];
                for (o, &y) in orow.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
    }
    let mut shape = a.shape()[..a.rank() - 1].to_vec();
    shape.push(d.c);
    Ok(Tensor::from_parts(shape, out))
}

/// Returns `(dL/da, dL/db)` given `g = dL/d(a·b)`.
pub(crate) fn matmul_backward(a: &Tensor, b: &Tensor, g: &Tensor) -> (Tensor, Tensor) {
    let d = matmul_dims(a.shape(), b.shape()).expect("shapes validated in forward");
    let (ad, bd, gd) = (a.data(), b.data(), g.data());
    let mut da = vec![0.0; ad.len()];
    let mut db = vec![0.0; bd.len()];
    for bi in 0..d.batch {
        let a_off = bi * d.r * d.k;
        let b_off = if d.b_batched { bi * d.k * d.c } else { 0 };
        let g_off = bi * d.r * d.c;
        for i in 0..d.r {
            let grow = &gd[g_off + i * d.c..g_off + (i + 1) * d.c];
            for p in 0..d.k {
                let brow = &bd[b_off + p * d.c..b_off + (p + 1) * d.c];
                // da = g · bᵀ
                da[a_off + i * d.k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                // db = aᵀ · g
                let x = ad[a_off + i * d.k + p];
                let dbrow = &mut db[b_off + p * d.c..b_off + (p + 1) * d.c];
                for (o, &gv) in dbrow.iter_mut().zip(grow) {
                    *o += x * gv;
                }
            }
        }
    }
    (
        Tensor::from_parts(a.shape().to_vec(), da),
        Tensor::from_parts(b.shape().to_vec(), db),
    )
}

pub(crate) fn gelu(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Row-wise softmax over the last axis with max subtraction.
pub(crate) fn softmax_rows(x: &Tensor) -> Tensor {
    let cols = *x.shape().last().unwrap_or(&1);
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::from_parts(x.shape().to_vec(), out)
}

pub(crate) fn layer_norm(x: &Tensor, eps: f64) -> Tensor {
    let cols = *x.shape().last().unwrap_or(&1);
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(cols) {
        let (mean, inv) = row_stats(row, eps);
        for v in row.iter_mut() {
            *v = (*v - mean) * inv;
        }
    }
    Tensor::from_parts(x.shape().to_vec(), out)
}

fn row_stats(row: &[f64], eps: f64) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + eps).sqrt())
}

/// dx = inv/N · (N·g − Σg − y·Σ(g·y)) per row, with y the normalized output.
pub(crate) fn layer_norm_backward(x: &Tensor, y: &Tensor, g: &Tensor, eps: f64) -> Tensor {
    let cols = *x.shape().last().unwrap_or(&1);
    let n = cols as f64;
    let mut out = vec![0.0; x.len()];
    for r in 0..x.len() / cols {
        let span = r * cols..(r + 1) * cols;
        let (_, inv) = row_stats(&x.data()[span.clone()], eps);
        let gr = &g.data()[span.clone()];
        let yr = &y.data()[span.clone()];
        let sum_g: f64 = gr.iter().sum();
        let sum_gy: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
        for (j, o) in out[span].iter_mut().enumerate() {
            *o = inv / n * (n * gr[j] - sum_g - yr[j] * sum_gy);
        }
    }
    Tensor::from_parts(x.shape().to_vec(), out)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub kh: usize,
    pub kw: usize,
    pub oh: usize,
    pub ow: usize,
}

pub(crate) fn conv_dims(x: &[usize], k: &[usize], stride: usize, padding: usize) -> Result<ConvDims> {
    if x.len() != 4 || k.len() != 4 || x[1] != k[1] {
        return Err(Error::dim("conv2d", x, k));
    }
    if stride == 0 {
        return Err(Error::Config("conv2d stride must be positive".into()));
    }
    let (h, w, kh, kw) = (x[2], x[3], k[2], k[3]);
    if h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(Error::dim("conv2d", x, k));
    }
    Ok(ConvDims {
        n: x[0],
        c: x[1],
        h,
        w,
        o: k[0],
        kh,
        kw,
        oh: (h + 2 * padding - kh) / stride + 1,
        ow: (w + 2 * padding - kw) / stride + 1,
    })
}

/// Cross-correlation (no kernel flip) plus per-channel bias.
pub(crate) fn conv2d(x: &Tensor, k: &Tensor, b: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let d = conv_dims(x.shape(), k.shape(), stride, padding)?;
    if b.shape() != [d.o] {
        return Err(Error::dim("conv2d bias", k.shape(), b.shape()));
    }
    let (xd, kd, bd) = (x.data(), k.data(), b.data());
    let mut out = vec![0.0; d.n * d.o * d.oh * d.ow];
    for ni in 0..d.n {
        for oc in 0..d.o {
            for oy in 0..d.oh {
                for ox in 0..d.ow {
                    let mut acc = bd[oc];
                    for ic in 0..d.c {
                        for ky in 0..d.kh {
                            let Some(iy) = (oy * stride + ky).checked_sub(padding).filter(|&v| v < d.h) else {
                                continue;
                            };
                            for kx in 0..d.kw {
                                let Some(ix) = (ox * stride + kx).checked_sub(padding).filter(|&v| v < d.w) else {
                                    continue;
                                };
                                acc += xd[((ni * d.c + ic) * d.h + iy) * d.w + ix]
                                    * kd[((oc * d.c + ic) * d.kh + ky) * d.kw + kx];
                            }
                        }
                    }
                    out[((ni * d.o + oc) * d.oh + oy) * d.ow + ox] = acc;
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![d.n, d.o, d.oh, d.ow], out))
}

pub(crate) fn conv2d_backward(
    x: &Tensor,
    k: &Tensor,
    g: &Tensor,
    stride: usize,
    padding: usize,
) -> (Tensor, Tensor, Tensor) {
    let d = conv_dims(x.shape(), k.shape(), stride, padding).expect("validated in forward");
    let (xd, kd, gd) = (x.data(), k.data(), g.data());
    let mut dx = vec![0.0; xd.len()];
    let mut dk = vec![0.0; kd.len()];
    let mut db = vec![0.0; d.o];
    for ni in 0..d.n {
        for oc in 0..d.o {
            for oy in 0..d.oh {
                for ox in 0..d.ow {
                    let gv = gd[((ni * d.o + oc) * d.oh + oy) * d.ow + ox];
                    db[oc] += gv;
                    for ic in 0..d.c {
                        for ky in 0..d.kh {
                            let Some(iy) = (oy * stride + ky).checked_sub(padding).filter(|&v| v < d.h) else {
                                continue;
                            };
                            for kx in 0..d.kw {
                                let Some(ix) = (ox * stride + kx).checked_sub(padding).filter(|&v| v < d.w) else {
                                    continue;
                                };
                                let xi = ((ni * d.c + ic) * d.h + iy) * d.w + ix;
                                let ki = ((oc * d.c + ic) * d.kh + ky) * d.kw + kx;
                                dx[xi] += gv * kd[ki];
                                dk[ki] += gv * xd[xi];
                            }
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::from_parts(x.shape().to_vec(), dx),
        Tensor::from_parts(k.shape().to_vec(), dk),
        Tensor::from_parts(vec![d.o], db),
    )
}

pub(crate) fn avg_pool2d(x: &Tensor, size: usize) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 4 || size == 0 || s[2] < size || s[3] < size {
        return Err(Error::dim("avg_pool2d", s, &[size, size]));
    }
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let (oh, ow) = (h / size, w / size);
    let scale = 1.0 / (size * size) as f64;
    let xd = x.data();
    let mut out = vec![0.0; n * c * oh * ow];
    for plane in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for dy in 0..size {
                    for dx in 0..size {
                        acc += xd[(plane * h + oy * size + dy) * w + ox * size + dx];
                    }
                }
                out[(plane * oh + oy) * ow + ox] = acc * scale;
            }
        }
    }
    Ok(Tensor::from_parts(vec![n, c, oh, ow], out))
}

pub(crate) fn avg_pool2d_backward(x: &Tensor, g: &Tensor, size: usize) -> Tensor {
    let s = x.shape();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let (oh, ow) = (h / size, w / size);
    let scale = 1.0 / (size * size) as f64;
    let gd = g.data();
    let mut dx = vec![0.0; x.len()];
    for plane in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let gv = gd[(plane * oh + oy) * ow + ox] * scale;
                for dy in 0..size {
                    for ddx in 0..size {
                        dx[(plane * h + oy * size + dy) * w + ox * size + ddx] += gv;
                    }
                }
            }
        }
    }
    Tensor::from_parts(s.to_vec(), dx)
}
