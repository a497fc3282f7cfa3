//! 2-D convolution and its transpose over `[batch, channels, height, width]`.
//!
//! Convolution weights are `[c_out, c_in, k, k]`; transposed-convolution
//! weights are `[c_in, c_out, k, k]`, so a transposed convolution sharing a
//! convolution's weight tensor is that convolution's adjoint.

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// `floor((size + 2p - k) / s) + 1`.
pub fn conv_output_size(size: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    if stride == 0 || kernel == 0 {
        return Err(Error::Shape("kernel and stride must be positive".into()));
    }
    let padded = size + 2 * padding;
    if padded < kernel {
        return Err(Error::Shape(format!(
            "kernel {kernel} does not fit input {size} with padding {padding}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// `(size - 1) s - 2p + k + output_padding`.
pub fn tconv_output_size(
    size: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<usize> {
    if stride == 0 || kernel == 0 || size == 0 {
        return Err(Error::Shape("kernel, stride and input size must be positive".into()));
    }
    if output_padding >= stride {
        return Err(Error::Shape(format!(
            "output padding {output_padding} must be smaller than stride {stride}"
        )));
    }
    let full = (size - 1) * stride + kernel + output_padding;
    if full <= 2 * padding {
        return Err(Error::Shape(format!(
            "padding {padding} removes the whole transposed-convolution output"
        )));
    }
    Ok(full - 2 * padding)
}

struct Dims {
    batch: usize,
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
    k: usize,
}

fn unpack(x: &Tensor, weight: &Tensor, transposed: bool) -> Result<Dims> {
    let (&[batch, c_in, h, w], &[w0, w1, k, k2]) = (x.shape(), weight.shape()) else {
        return Err(Error::Shape(format!(
            "convolution expects 4-D input and weight, got {:?} and {:?}",
            x.shape(),
            weight.shape()
        )));
    };
    let (wc_in, c_out) = if transposed { (w0, w1) } else { (w1, w0) };
    if k != k2 {
        return Err(Error::Shape(format!("kernel must be square, got {k}x{k2}")));
    }
    if wc_in != c_in {
        return Err(Error::Shape(format!("input has {c_in} channels, weight expects {wc_in}")));
    }
    Ok(Dims {
        batch,
        c_in,
        c_out,
        h,
        w,
        k,
    })
}

fn check_bias(bias: Option<&Tensor>, c_out: usize) -> Result<()> {
    match bias {
        Some(b) if b.shape() != [c_out] => Err(Error::Shape(format!(
            "bias {:?} does not match {c_out} output channels",
            b.shape()
        ))),
        _ => Ok(()),
    }
}

/// Maps output coordinate + kernel tap to an input coordinate, if in bounds.
#[inline]
fn source(o: usize, tap: usize, stride: usize, padding: usize, limit: usize) -> Option<usize> {
    let i = (o * stride + tap).checked_sub(padding)?;
    (i < limit).then_some(i)
}

/// Cross-correlation plus per-channel bias.
pub fn conv2d_forward(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let d = unpack(x, weight, false)?;
    check_bias(bias, d.c_out)?;
    let oh = conv_output_size(d.h, d.k, stride, padding)?;
    let ow = conv_output_size(d.w, d.k, stride, padding)?;
    let (xs, ws) = (x.data(), weight.data());
    let mut out = vec![0.0; d.batch * d.c_out * oh * ow];
    for b in 0..d.batch {
        for co in 0..d.c_out {
            let base = bias.map_or(0.0, |t| t.data()[co]);
            let plane = &mut out[(b * d.c_out + co) * oh * ow..][..oh * ow];
            plane.iter_mut().for_each(|v| *v = base);
            for ci in 0..d.c_in {
                let xp = &xs[(b * d.c_in + ci) * d.h * d.w..][..d.h * d.w];
                let wk = &ws[(co * d.c_in + ci) * d.k * d.k..][..d.k * d.k];
                for oy in 0..oh {
                    for ky in 0..d.k {
                        let Some(iy) = source(oy, ky, stride, padding, d.h) else {
                            continue;
                        };
                        for ox in 0..ow {
                            let mut acc = 0.0;
                            for kx in 0..d.k {
                                if let Some(ix) = source(ox, kx, stride, padding, d.w) {
                                    acc += xp[iy * d.w + ix] * wk[ky * d.k + kx];
                                }
                            }
                            plane[oy * ow + ox] += acc;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![d.batch, d.c_out, oh, ow], out)
}

/// Returns `(dx, dW, db)` for a convolution with upstream `grad_out`.
pub fn conv2d_backward(
    x: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, Tensor, Tensor)> {
    let d = unpack(x, weight, false)?;
    let oh = conv_output_size(d.h, d.k, stride, padding)?;
    let ow = conv_output_size(d.w, d.k, stride, padding)?;
    if grad_out.shape() != [d.batch, d.c_out, oh, ow] {
        return Err(Error::Shape(format!(
            "upstream gradient {:?} does not match conv output [{}, {}, {oh}, {ow}]",
            grad_out.shape(),
            d.batch,
            d.c_out
        )));
    }
    let (xs, ws, gs) = (x.data(), weight.data(), grad_out.data());
    let mut dx = vec![0.0; xs.len()];
    let mut dw = vec![0.0; ws.len()];
    let mut db = vec![0.0; d.c_out];
    for b in 0..d.batch {
        for co in 0..d.c_out {
            let gp = &gs[(b * d.c_out + co) * oh * ow..][..oh * ow];
            db[co] += gp.iter().sum::<f64>();
            for ci in 0..d.c_in {
                let xoff = (b * d.c_in + ci) * d.h * d.w;
                let woff = (co * d.c_in + ci) * d.k * d.k;
                for oy in 0..oh {
                    for ky in 0..d.k {
                        let Some(iy) = source(oy, ky, stride, padding, d.h) else {
                            continue;
                        };
                        for ox in 0..ow {
                            let g = gp[oy * ow + ox];
                            for kx in 0..d.k {
                                if let Some(ix) = source(ox, kx, stride, padding, d.w) {
                                    let xi = xoff + iy * d.w + ix;
                                    let wi = woff + ky * d.k + kx;
                                    dw[wi] += g * xs[xi];
                                    dx[xi] += g * ws[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(x.shape().to_vec(), dx)?,
        Tensor::new(weight.shape().to_vec(), dw)?,
        Tensor::new(vec![d.c_out], db)?,
    ))
}

/// Transposed convolution: every input pixel scatter-adds a scaled kernel
/// copy at stride `s`, cropped by `padding` and extended by `output_padding`.
pub fn tconv2d_forward(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<Tensor> {
    let d = unpack(x, weight, true)?;
    check_bias(bias, d.c_out)?;
    let oh = tconv_output_size(d.h, d.k, stride, padding, output_padding)?;
    let ow = tconv_output_size(d.w, d.k, stride, padding, output_padding)?;
    let (xs, ws) = (x.data(), weight.data());
    let mut out = vec![0.0; d.batch * d.c_out * oh * ow];
    for b in 0..d.batch {
        for co in 0..d.c_out {
            let base = bias.map_or(0.0, |t| t.data()[co]);
            out[(b * d.c_out + co) * oh * ow..][..oh * ow]
                .iter_mut()
                .for_each(|v| *v = base);
        }
        for ci in 0..d.c_in {
            let xp = &xs[(b * d.c_in + ci) * d.h * d.w..][..d.h * d.w];
            for co in 0..d.c_out {
                let wk = &ws[(ci * d.c_out + co) * d.k * d.k..][..d.k * d.k];
                let plane = &mut out[(b * d.c_out + co) * oh * ow..][..oh * ow];
                for iy in 0..d.h {
                    for ky in 0..d.k {
                        let Some(oy) = source(iy, ky, stride, padding, oh) else {
                            continue;
                        };
                        for ix in 0..d.w {
                            let v = xp[iy * d.w + ix];
                            for kx in 0..d.k {
                                if let Some(ox) = source(ix, kx, stride, padding, ow) {
                                    plane[oy * ow + ox] += v * wk[ky * d.k + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![d.batch, d.c_out, oh, ow], out)
}

/// Returns `(dx, dW, db)` for a transposed convolution with upstream `grad_out`.
pub fn tconv2d_backward(
    x: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<(Tensor, Tensor, Tensor)> {
    let d = unpack(x, weight, true)?;
    let oh = tconv_output_size(d.h, d.k, stride, padding, output_padding)?;
    let ow = tconv_output_size(d.w, d.k, stride, padding, output_padding)?;
    if grad_out.shape() != [d.batch, d.c_out, oh, ow] {
        return Err(Error::Shape(format!(
            "upstream gradient {:?} does not match transposed-conv output [{}, {}, {oh}, {ow}]",
            grad_out.shape(),
            d.batch,
            d.c_out
        )));
    }
    let (xs, ws, gs) = (x.data(), weight.data(), grad_out.data());
    let mut dx = vec![0.0; xs.len()];
    let mut dw = vec![0.0; ws.len()];
    let mut db = vec![0.0; d.c_out];
    for b in 0..d.batch {
        for co in 0..d.c_out {
            db[co] += gs[(b * d.c_out + co) * oh * ow..][..oh * ow].iter().sum::<f64>();
        }
        for ci in 0..d.c_in {
            let xoff = (b * d.c_in + ci) * d.h * d.w;
            for co in 0..d.c_out {
                let woff = (ci * d.c_out + co) * d.k * d.k;
                let gp = &gs[(b * d.c_out + co) * oh * ow..][..oh * ow];
                for iy in 0..d.h {
                    for ky in 0..d.k {
                        let Some(oy) = source(iy, ky, stride, padding, oh) else {
                            continue;
                        };
                        for ix in 0..d.w {
                            let xi = xoff + iy * d.w + ix;
                            let v = xs[xi];
                            let mut acc = 0.0;
                            for kx in 0..d.k {
                                if let Some(ox) = source(ix, kx, stride, padding, ow) {
                                    let g = gp[oy * ow + ox];
                                    let wi = woff + ky * d.k + kx;
                                    acc += g * ws[wi];
                                    dw[wi] += g * v;
                                }
                            }
                            dx[xi] += acc;
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(x.shape().to_vec(), dx)?,
        Tensor::new(weight.shape().to_vec(), dw)?,
        Tensor::new(vec![d.c_out], db)?,
    ))
}
