use crate::error::{Error, Result};
use crate::nn::Tensor;

fn check(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<(usize, usize, usize)> {
    let (&[batch, n_in], &[w_in, n_out]) = (x.shape(), w.shape()) else {
        return Err(Error::Shape(format!(
            "dense expects x[batch, in] and W[in, out], got {:?} and {:?}",
            x.shape(),
            w.shape()
        )));
    };
    if n_in != w_in {
        return Err(Error::Shape(format!("dense input has {n_in} features, W expects {w_in}")));
    }
    if let Some(b) = b {
        if b.shape() != [n_out] {
            return Err(Error::Shape(format!("dense bias {:?} does not match {n_out} outputs", b.shape())));
        }
    }
    Ok((batch, n_in, n_out))
}

/// `y = x W + b` for `x[batch, in]`, `W[in, out]`, `b[out]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let (batch, n_in, n_out) = check(x, w, b)?;
    let mut y = vec![0.0; batch * n_out];
    for (xr, yr) in x.data().chunks(n_in).zip(y.chunks_mut(n_out)) {
        if let Some(b) = b {
            yr.copy_from_slice(b.data());
        }
        for (xi, wr) in xr.iter().zip(w.data().chunks(n_out)) {
            for (yj, wij) in yr.iter_mut().zip(wr) {
                *yj += xi * wij;
            }
        }
    }
    Tensor::new(vec![batch, n_out], y)
}

/// Returns `(dx, dW, db)` for upstream `grad_out[batch, out]`.
pub fn dense_backward(x: &Tensor, w: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (batch, n_in, n_out) = check(x, w, None)?;
    if grad_out.shape() != [batch, n_out] {
        return Err(Error::Shape(format!(
            "dense upstream gradient {:?} does not match [{batch}, {n_out}]",
            grad_out.shape()
        )));
    }
    let mut dx = vec![0.0; batch * n_in];
    let mut dw = vec![0.0; n_in * n_out];
    let mut db = vec![0.0; n_out];
    for ((xr, gr), dxr) in x
        .data()
        .chunks(n_in)
        .zip(grad_out.data().chunks(n_out))
        .zip(dx.chunks_mut(n_in))
    {
        for (dbj, gj) in db.iter_mut().zip(gr) {
            *dbj += gj;
        }
        for ((xi, dxi), (wr, dwr)) in xr
            .iter()
            .zip(dxr.iter_mut())
            .zip(w.data().chunks(n_out).zip(dw.chunks_mut(n_out)))
        {
            let mut acc = 0.0;
            for ((gj, wij), dwij) in gr.iter().zip(wr).zip(dwr.iter_mut()) {
                acc += gj * wij;
                *dwij += xi * gj;
            }
            *dxi = acc;
        }
    }
    Ok((
        Tensor::new(vec![batch, n_in], dx)?,
        Tensor::new(vec![n_in, n_out], dw)?,
        Tensor::new(vec![n_out], db)?,
    ))
}
