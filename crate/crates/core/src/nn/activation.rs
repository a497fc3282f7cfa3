use crate::error::{Error, Result};
use crate::nn::Tensor;

pub fn relu_forward(x: &Tensor) -> Tensor {
    map(x, |v| v.max(0.0))
}

/// Passes `grad_out` where the forward input was positive.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    zip(x, grad_out, |xi, g| if xi > 0.0 { g } else { 0.0 })
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_forward(x: &Tensor) -> Tensor {
    map(x, sigmoid)
}

/// Takes the forward *output* `y` and applies `y (1 - y)`.
pub fn sigmoid_backward(y: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    zip(y, grad_out, |yi, g| g * yi * (1.0 - yi))
}

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| f(*v)).collect())
        .expect("elementwise map preserves shape")
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "activation gradient {:?} does not match {:?}",
            b.shape(),
            a.shape()
        )));
    }
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(x, g)| f(*x, *g)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_examples() {
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0]);
        let g = Tensor::full(vec![3], 1.0);
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        let y = sigmoid_forward(&Tensor::zeros(vec![1]));
        let g = sigmoid_backward(&y, &Tensor::full(vec![1], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.25]);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!(sigmoid(-800.0).is_finite());
    }
}
