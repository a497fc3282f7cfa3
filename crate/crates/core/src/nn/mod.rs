//! Minimal reverse-mode layer stack.
//!
//! A [`Sequential`] is a fixed pipeline of [`Layer`]s. `forward` caches what
//! each layer needs; `backward` walks the stack in reverse, accumulating
//! parameter gradients and returning the gradient w.r.t. the network input.
//! All tensors are `[batch, ...]`.

mod activation;
mod conv;
mod dense;
mod loss;
mod tensor;

pub use activation::{relu_backward, relu_forward, sigmoid, sigmoid_backward, sigmoid_forward};
pub use conv::{
    conv2d_backward, conv2d_forward, conv_output_size, tconv2d_backward, tconv2d_forward, tconv_output_size,
};
pub use dense::{dense_backward, dense_forward};
pub use loss::{bce_loss, mse_loss, BCE_EPS};
pub use tensor::Tensor;

use rand::Rng;

use crate::error::{Error, Result};

/// Layer kind plus the sizes needed to infer shapes before data flows.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        bias: bool,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    ConvTranspose2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    },
    Relu,
    Sigmoid,
    /// `[batch, ...] -> [batch, prod(...)]`.
    Flatten,
    /// `[batch, prod(dims)] -> [batch, dims...]`.
    Reshape(Vec<usize>),
}

impl LayerSpec {
    /// Output shape (batch included) for `input` (batch included).
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let err = || Error::Shape(format!("{self:?} cannot take input {input:?}"));
        Ok(match self {
            LayerSpec::Dense { inputs, outputs, .. } => match input {
                [b, n] if n == inputs => vec![*b, *outputs],
                _ => return Err(err()),
            },
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => match input {
                [b, c, h, w] if c == in_channels => vec![
                    *b,
                    *out_channels,
                    conv_output_size(*h, *kernel, *stride, *padding)?,
                    conv_output_size(*w, *kernel, *stride, *padding)?,
                ],
                _ => return Err(err()),
            },
            LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                output_padding,
            } => match input {
                [b, c, h, w] if c == in_channels => vec![
                    *b,
                    *out_channels,
                    tconv_output_size(*h, *kernel, *stride, *padding, *output_padding)?,
                    tconv_output_size(*w, *kernel, *stride, *padding, *output_padding)?,
                ],
                _ => return Err(err()),
            },
            LayerSpec::Relu | LayerSpec::Sigmoid => input.to_vec(),
            LayerSpec::Flatten => match input {
                [b, rest @ ..] if !rest.is_empty() => vec![*b, rest.iter().product()],
                _ => return Err(err()),
            },
            LayerSpec::Reshape(dims) => match input {
                [b, n] if *n == dims.iter().product::<usize>() => {
                    let mut out = vec![*b];
                    out.extend(dims);
                    out
                }
                _ => return Err(err()),
            },
        })
    }

    /// Trainable tensor shapes in `(name, shape)` order.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerSpec::Dense { inputs, outputs, bias } => {
                let mut v = vec![("weight", vec![inputs, outputs])];
                if bias {
                    v.push(("bias", vec![outputs]));
                }
                v
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                ("weight", vec![out_channels, in_channels, kernel, kernel]),
                ("bias", vec![out_channels]),
            ],
            LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                ("weight", vec![in_channels, out_channels, kernel, kernel]),
                ("bias", vec![out_channels]),
            ],
            _ => Vec::new(),
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Conv2d { in_channels, kernel, .. } | LayerSpec::ConvTranspose2d { in_channels, kernel, .. } => {
                in_channels * kernel * kernel
            }
            _ => 1,
        }
    }
}

/// A layer instance: its spec, its parameters, and its forward cache.
#[derive(Clone, Debug)]
pub struct Layer {
    spec: LayerSpec,
    params: Vec<Tensor>,
    cache: Option<Tensor>,
}

impl Layer {
    /// Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), biases zero.
    pub fn init<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Self {
        let bound = (1.0 / spec.fan_in() as f64).sqrt();
        let params = spec
            .param_shapes()
            .into_iter()
            .map(|(name, shape)| {
                let n = shape.iter().product();
                let data = if name == "weight" {
                    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
                } else {
                    vec![0.0; n]
                };
                Tensor::param(shape, data).expect("shape and data agree")
            })
            .collect();
        Self {
            spec,
            params,
            cache: None,
        }
    }

    /// All parameters zero.
    pub fn zeroed(spec: LayerSpec) -> Self {
        let params = spec
            .param_shapes()
            .into_iter()
            .map(|(_, shape)| {
                let n = shape.iter().product();
                Tensor::param(shape, vec![0.0; n]).expect("shape and data agree")
            })
            .collect();
        Self {
            spec,
            params,
            cache: None,
        }
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    fn bias(&self) -> Option<&Tensor> {
        self.params.get(1)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        self.spec.output_shape(x.shape())?;
        let y = match &self.spec {
            LayerSpec::Dense { .. } => dense_forward(x, &self.params[0], self.bias())?,
            LayerSpec::Conv2d { stride, padding, .. } => {
                conv2d_forward(x, &self.params[0], self.bias(), *stride, *padding)?
            }
            LayerSpec::ConvTranspose2d {
                stride,
                padding,
                output_padding,
                ..
            } => tconv2d_forward(x, &self.params[0], self.bias(), *stride, *padding, *output_padding)?,
            LayerSpec::Relu => relu_forward(x),
            LayerSpec::Sigmoid => {
                let y = sigmoid_forward(x);
                self.cache = Some(y.clone());
                return Ok(y);
            }
            LayerSpec::Flatten | LayerSpec::Reshape(_) => {
                let shape = self.spec.output_shape(x.shape())?;
                x.clone().reshape(shape)?
            }
        };
        self.cache = Some(x.clone());
        Ok(y)
    }

    /// Accumulates parameter gradients; returns the input gradient.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cached = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State(format!("backward before forward on {:?}", self.spec)))?;
        let (dx, param_grads) = match &self.spec {
            LayerSpec::Dense { .. } => {
                let (dx, dw, db) = dense_backward(cached, &self.params[0], grad_out)?;
                (dx, vec![dw, db])
            }
            LayerSpec::Conv2d { stride, padding, .. } => {
                let (dx, dw, db) = conv2d_backward(cached, &self.params[0], grad_out, *stride, *padding)?;
                (dx, vec![dw, db])
            }
            LayerSpec::ConvTranspose2d {
                stride,
                padding,
                output_padding,
                ..
            } => {
                let (dx, dw, db) =
                    tconv2d_backward(cached, &self.params[0], grad_out, *stride, *padding, *output_padding)?;
                (dx, vec![dw, db])
            }
            LayerSpec::Relu => (relu_backward(cached, grad_out)?, Vec::new()),
            LayerSpec::Sigmoid => (sigmoid_backward(cached, grad_out)?, Vec::new()),
            LayerSpec::Flatten | LayerSpec::Reshape(_) => {
                if grad_out.len() != cached.len() {
                    return Err(Error::Shape(format!(
                        "reshape gradient {:?} does not match input {:?}",
                        grad_out.shape(),
                        cached.shape()
                    )));
                }
                (grad_out.clone().reshape(cached.shape().to_vec())?, Vec::new())
            }
        };
        for (p, g) in self.params.iter_mut().zip(param_grads) {
            for (acc, v) in p.grad_mut().iter_mut().zip(g.data()) {
                *acc += v;
            }
        }
        Ok(dx)
    }
}

/// A fixed sequential pipeline.
#[derive(Clone, Debug)]
pub struct Sequential {
    layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn init<R: Rng + ?Sized>(specs: Vec<LayerSpec>, rng: &mut R) -> Self {
        Self::new(specs.into_iter().map(|s| Layer::init(s, rng)).collect())
    }

    pub fn zeroed(specs: Vec<LayerSpec>) -> Self {
        Self::new(specs.into_iter().map(Layer::zeroed).collect())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.layers
            .iter()
            .try_fold(input.to_vec(), |shape, l| l.spec.output_shape(&shape))
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// Forward pass without touching any cache.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let mut scratch = self.clone();
        scratch.forward(x)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mut g = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().for_each(Tensor::zero_grad);
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut())
    }

    /// `(name, tensor)` pairs such as `"3.weight"`.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.spec
                    .param_shapes()
                    .into_iter()
                    .zip(&l.params)
                    .map(move |((name, _), t)| (format!("{i}.{name}"), t))
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().map(Tensor::len).sum()
    }

    /// One plain SGD step over every parameter using its accumulated gradient.
    pub fn sgd_step(&mut self, lr: f64) {
        for p in self.params_mut() {
            let grad = p.grad().map(<[f64]>::to_vec).unwrap_or_default();
            if !grad.is_empty() {
                sgd_step(p.data_mut(), &grad, lr);
            }
        }
    }
}

/// `p <- p - lr * g`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) {
    debug_assert_eq!(params.len(), grads.len());
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}
