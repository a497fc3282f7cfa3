use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before the log.
pub const BCE_EPS: f64 = 1e-7;

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() || a.is_empty() {
        return Err(Error::Shape(format!(
            "loss inputs {:?} and {:?} must match and be non-empty",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Mean squared error over every element, with its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    same_shape(pred, target)?;
    let n = pred.len() as f64;
    let diff: Vec<f64> = pred.data().iter().zip(target.data()).map(|(p, t)| p - t).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.into_iter().map(|d| 2.0 * d / n).collect();
    Ok((loss, Tensor::new(pred.shape().to_vec(), grad)?))
}

/// Mean binary cross entropy `-[y ln p + (1 - y) ln(1 - p)]` with its gradient.
///
/// The gradient is zero where `p` lies outside the clamp range.
pub fn bce_loss(pred: &Tensor, labels: &Tensor) -> Result<(f64, Tensor)> {
    same_shape(pred, labels)?;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &y) in pred.data().iter().zip(labels.data()) {
        let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        let inside = p > BCE_EPS && p < 1.0 - BCE_EPS;
        grad.push(if inside { (pc - y) / (pc * (1.0 - pc)) / n } else { 0.0 });
    }
    Ok((loss / n, Tensor::new(pred.shape().to_vec(), grad)?))
}
