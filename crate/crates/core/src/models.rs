//! Concrete networks: the row-normalizing convolutional autoencoder, the
//! 40-64-16-1 discriminator, and the two baselines (random-latent decoding
//! and a parameter-matched classical latent generator).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::{self, EvalMode, GeneratorParams, NoiseVector};
use crate::nn::{LayerSpec, Sequential, Tensor};

pub use crate::latent::LatentMatrix;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const LATENT_ROWS: usize = 5;
pub const LATENT_COLS: usize = 8;
pub const LATENT_LEN: usize = LATENT_ROWS * LATENT_COLS;

/// Rows whose sum falls below this are replaced by the uniform row.
pub const ROW_SUM_EPS: f64 = 1e-9;

/// Divides each row of a non-negative `rows x cols` matrix by its sum.
pub fn normalize_rows(h: &[f64], rows: usize, cols: usize) -> Result<LatentMatrix> {
    if rows == 0 || cols == 0 || h.len() != rows * cols {
        return Err(Error::Shape(format!("{} values cannot form {rows}x{cols}", h.len())));
    }
    if let Some(v) = h.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!("cannot normalize negative or non-finite entry {v}")));
    }
    let mut out = Vec::with_capacity(h.len());
    for row in h.chunks(cols) {
        let sum: f64 = row.iter().sum();
        if sum < ROW_SUM_EPS {
            out.extend(std::iter::repeat_n(1.0 / cols as f64, cols));
        } else {
            out.extend(row.iter().map(|v| v / sum));
        }
    }
    Ok(LatentMatrix::from_rows_unchecked(rows, cols, out))
}

/// Gradient through [`normalize_rows`]: `dh_k = (g_k - sum_j g_j h^_j) / S`
/// per row; fallback rows are constant and pass no gradient.
pub fn normalize_rows_backward(h: &[f64], upstream: &[f64], cols: usize) -> Result<Vec<f64>> {
    if h.len() != upstream.len() || cols == 0 || !h.len().is_multiple_of(cols) {
        return Err(Error::Shape(format!(
            "row-normalization gradient {} does not match input {}",
            upstream.len(),
            h.len()
        )));
    }
    let mut grad = Vec::with_capacity(h.len());
    for (row, g) in h.chunks(cols).zip(upstream.chunks(cols)) {
        let sum: f64 = row.iter().sum();
        if sum < ROW_SUM_EPS {
            grad.extend(std::iter::repeat_n(0.0, cols));
            continue;
        }
        let weighted: f64 = row.iter().zip(g).map(|(v, gj)| gj * v / sum).sum();
        grad.extend(g.iter().map(|gk| (gk - weighted) / sum));
    }
    Ok(grad)
}

pub fn encoder_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 8,
            kernel: 3,
            stride: 2,
            padding: 1,
        },
        LayerSpec::Relu,
        LayerSpec::Conv2d {
            in_channels: 8,
            out_channels: 16,
            kernel: 3,
            stride: 2,
            padding: 1,
        },
        LayerSpec::Relu,
        LayerSpec::Flatten,
        LayerSpec::Dense {
            inputs: 16 * 7 * 7,
            outputs: LATENT_LEN,
            bias: true,
        },
        LayerSpec::Relu,
    ]
}

pub fn decoder_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            inputs: LATENT_LEN,
            outputs: 16 * 7 * 7,
            bias: true,
        },
        LayerSpec::Relu,
        LayerSpec::Reshape(vec![16, 7, 7]),
        LayerSpec::ConvTranspose2d {
            in_channels: 16,
            out_channels: 8,
            kernel: 3,
            stride: 2,
            padding: 1,
            output_padding: 1,
        },
        LayerSpec::Relu,
        LayerSpec::ConvTranspose2d {
            in_channels: 8,
            out_channels: 1,
            kernel: 3,
            stride: 2,
            padding: 1,
            output_padding: 1,
        },
        LayerSpec::Sigmoid,
    ]
}

fn image_batch(images: &[&[f64]]) -> Result<Tensor> {
    if images.is_empty() {
        return Err(Error::Data("empty image batch".into()));
    }
    let mut data = Vec::with_capacity(images.len() * IMAGE_PIXELS);
    for img in images {
        if img.len() != IMAGE_PIXELS {
            return Err(Error::Shape(format!("image has {} pixels, expected {IMAGE_PIXELS}", img.len())));
        }
        data.extend_from_slice(img);
    }
    Tensor::new(vec![images.len(), 1, IMAGE_SIDE, IMAGE_SIDE], data)
}

/// Encoder (conv stack ending in a ReLU'd 40-vector, then row normalization)
/// and decoder (dense, two transposed convolutions, sigmoid).
#[derive(Clone, Debug)]
pub struct Autoencoder {
    encoder: Sequential,
    decoder: Sequential,
    pre_norm: Option<Vec<f64>>,
}

impl Autoencoder {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let encoder = Sequential::init(encoder_specs(), rng);
        let decoder = Sequential::init(decoder_specs(), rng);
        Self::from_parts(encoder, decoder)
    }

    pub fn zeroed() -> Self {
        Self::from_parts(Sequential::zeroed(encoder_specs()), Sequential::zeroed(decoder_specs()))
    }

    pub fn from_parts(encoder: Sequential, decoder: Sequential) -> Self {
        Self {
            encoder,
            decoder,
            pre_norm: None,
        }
    }

    pub fn encoder(&self) -> &Sequential {
        &self.encoder
    }

    pub fn decoder(&self) -> &Sequential {
        &self.decoder
    }

    pub fn encoder_mut(&mut self) -> &mut Sequential {
        &mut self.encoder
    }

    pub fn decoder_mut(&mut self) -> &mut Sequential {
        &mut self.decoder
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn encode(&self, image: &[f64]) -> Result<LatentMatrix> {
        Ok(self.encode_batch(&[image])?.remove(0))
    }

    pub fn encode_batch(&self, images: &[&[f64]]) -> Result<Vec<LatentMatrix>> {
        let h = self.encoder.infer(&image_batch(images)?)?;
        h.data()
            .chunks(LATENT_LEN)
            .map(|row| normalize_rows(row, LATENT_ROWS, LATENT_COLS))
            .collect()
    }

    pub fn decode(&self, latent: &LatentMatrix) -> Result<Vec<f64>> {
        Ok(self.decode_batch(std::slice::from_ref(latent))?.remove(0))
    }

    pub fn decode_batch(&self, latents: &[LatentMatrix]) -> Result<Vec<Vec<f64>>> {
        if latents.is_empty() {
            return Ok(Vec::new());
        }
        let mut data = Vec::with_capacity(latents.len() * LATENT_LEN);
        for l in latents {
            if (l.rows(), l.cols()) != (LATENT_ROWS, LATENT_COLS) {
                return Err(Error::Shape(format!(
                    "decoder takes {LATENT_ROWS}x{LATENT_COLS} latents, got {}x{}",
                    l.rows(),
                    l.cols()
                )));
            }
            data.extend_from_slice(l.as_slice());
        }
        let out = self.decoder.infer(&Tensor::new(vec![latents.len(), LATENT_LEN], data)?)?;
        Ok(out.data().chunks(IMAGE_PIXELS).map(<[f64]>::to_vec).collect())
    }

    /// Training forward pass: reconstructions `[batch, 1, 28, 28]`, caching
    /// everything [`Autoencoder::backward`] needs.
    pub fn forward(&mut self, images: &[&[f64]]) -> Result<Tensor> {
        let h = self.encoder.forward(&image_batch(images)?)?;
        let mut latent = Vec::with_capacity(h.len());
        for row in h.data().chunks(LATENT_LEN) {
            latent.extend(normalize_rows(row, LATENT_ROWS, LATENT_COLS)?.into_vec());
        }
        self.pre_norm = Some(h.data().to_vec());
        self.decoder.forward(&Tensor::new(vec![images.len(), LATENT_LEN], latent)?)
    }

    /// Accumulates gradients of both halves from the reconstruction gradient.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<()> {
        let h = self
            .pre_norm
            .as_ref()
            .ok_or_else(|| Error::State("autoencoder backward before forward".into()))?;
        let g_latent = self.decoder.backward(grad_out)?;
        let g_h = normalize_rows_backward(h, g_latent.data(), LATENT_COLS)?;
        self.encoder.backward(&Tensor::new(vec![h.len() / LATENT_LEN, LATENT_LEN], g_h)?)?;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.encoder.zero_grad();
        self.decoder.zero_grad();
    }

    pub fn sgd_step(&mut self, lr: f64) {
        self.encoder.sgd_step(lr);
        self.decoder.sgd_step(lr);
    }
}

pub fn discriminator_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            inputs: LATENT_LEN,
            outputs: 64,
            bias: true,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            inputs: 64,
            outputs: 16,
            bias: true,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            inputs: 16,
            outputs: 1,
            bias: true,
        },
        LayerSpec::Sigmoid,
    ]
}

/// Fully connected 40 -> 64 -> 16 -> 1 classifier; 1 means "real".
#[derive(Clone, Debug)]
pub struct Discriminator {
    net: Sequential,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            net: Sequential::init(discriminator_specs(), rng),
        }
    }

    pub fn zeroed() -> Self {
        Self {
            net: Sequential::zeroed(discriminator_specs()),
        }
    }

    pub fn from_net(net: Sequential) -> Self {
        Self { net }
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Sequential {
        &mut self.net
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    fn input(latent_flat: &[f64]) -> Result<Tensor> {
        if latent_flat.len() != LATENT_LEN {
            return Err(Error::Shape(format!(
                "discriminator takes {LATENT_LEN} values, got {}",
                latent_flat.len()
            )));
        }
        Tensor::new(vec![1, LATENT_LEN], latent_flat.to_vec())
    }

    /// Confidence that the flattened latent is real.
    pub fn discriminate(&self, latent_flat: &[f64]) -> Result<f64> {
        Ok(self.net.infer(&Self::input(latent_flat)?)?.data()[0])
    }

    /// Caching forward pass; returns the `[1, 1]` output.
    pub fn forward(&mut self, latent_flat: &[f64]) -> Result<Tensor> {
        self.net.forward(&Self::input(latent_flat)?)
    }

    /// Accumulates parameter gradients; returns the gradient w.r.t. the 40 inputs.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Vec<f64>> {
        Ok(self.net.backward(grad_out)?.into_data())
    }
}

/// Uniform(0, 1) entries, row-normalized.
pub fn random_latent<R: Rng + ?Sized>(rng: &mut R) -> LatentMatrix {
    let raw: Vec<f64> = (0..LATENT_LEN).map(|_| rng.random::<f64>()).collect();
    normalize_rows(&raw, LATENT_ROWS, LATENT_COLS).expect("uniform draws are non-negative")
}

/// The random-decoder baseline: decode a random row-normalized latent.
pub fn random_decoder_sample(ae: &Autoencoder, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ae.decode(&random_latent(&mut rng))
}

pub fn random_decoder_samples<R: Rng + ?Sized>(ae: &Autoencoder, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let latents: Vec<LatentMatrix> = (0..count).map(|_| random_latent(rng)).collect();
    ae.decode_batch(&latents)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    Quantum,
    Classical,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Quantum => "quantum",
            GeneratorKind::Classical => "classical",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(GeneratorKind::Quantum),
            "classical" => Ok(GeneratorKind::Classical),
            other => Err(Error::Domain(format!("unknown generator kind {other:?}"))),
        }
    }
}

/// What the adversarial loop needs from a latent generator.
pub trait LatentGenerator {
    fn kind(&self) -> GeneratorKind;
    fn param_count(&self) -> usize;
    fn param_vec(&self) -> Vec<f64>;
    fn noise_len(&self) -> usize;
    fn sample_noise(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    fn generate(&self, z: &[f64]) -> Result<LatentMatrix>;
    /// Gradient of `<upstream, generate(z)>` w.r.t. the parameters.
    fn gradient(&self, z: &[f64], upstream: &[f64]) -> Result<Vec<f64>>;
    fn sgd_step(&mut self, grad: &[f64], lr: f64);
}

impl LatentGenerator for GeneratorParams {
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::Quantum
    }

    fn param_count(&self) -> usize {
        self.len()
    }

    fn param_vec(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }

    fn noise_len(&self) -> usize {
        self.config().n_qubits()
    }

    fn sample_noise(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        generator::sample_noise_with(self.config(), rng).as_slice().to_vec()
    }

    fn generate(&self, z: &[f64]) -> Result<LatentMatrix> {
        generator::run_generator(self, &NoiseVector::new(z.to_vec()))
    }

    fn gradient(&self, z: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        generator::generator_gradient(self, &NoiseVector::new(z.to_vec()), upstream, EvalMode::Analytic)
    }

    fn sgd_step(&mut self, grad: &[f64], lr: f64) {
        crate::nn::sgd_step(self.as_mut_slice(), grad, lr);
    }
}

/// Noise length of the classical baseline, matching the 4-qubit circuits.
pub const CLASSICAL_NOISE_LEN: usize = 4;

/// dense(4 -> 3, no bias) -> ReLU -> dense(3 -> 2) -> ReLU -> dense(2 -> 40)
/// -> sigmoid -> row normalization: 12 + 8 + 120 = 140 parameters.
pub fn classical_generator_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            inputs: CLASSICAL_NOISE_LEN,
            outputs: 3,
            bias: false,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            inputs: 3,
            outputs: 2,
            bias: true,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            inputs: 2,
            outputs: LATENT_LEN,
            bias: true,
        },
        LayerSpec::Sigmoid,
    ]
}

#[derive(Clone, Debug)]
pub struct ClassicalGenerator {
    net: Sequential,
    noise_high: f64,
}

impl ClassicalGenerator {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_net(Sequential::init(classical_generator_specs(), rng))
    }

    pub fn from_net(net: Sequential) -> Self {
        Self {
            net,
            noise_high: std::f64::consts::PI,
        }
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Sequential {
        &mut self.net
    }

    fn input(z: &[f64]) -> Result<Tensor> {
        if z.len() != CLASSICAL_NOISE_LEN {
            return Err(Error::Shape(format!(
                "classical generator takes {CLASSICAL_NOISE_LEN} noise values, got {}",
                z.len()
            )));
        }
        Tensor::new(vec![1, CLASSICAL_NOISE_LEN], z.to_vec())
    }
}

impl LatentGenerator for ClassicalGenerator {
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::Classical
    }

    fn param_count(&self) -> usize {
        self.net.param_count()
    }

    fn param_vec(&self) -> Vec<f64> {
        self.net.params().flat_map(|p| p.data().to_vec()).collect()
    }

    fn noise_len(&self) -> usize {
        CLASSICAL_NOISE_LEN
    }

    fn sample_noise(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..CLASSICAL_NOISE_LEN).map(|_| rng.random_range(0.0..self.noise_high)).collect()
    }

    fn generate(&self, z: &[f64]) -> Result<LatentMatrix> {
        let h = self.net.infer(&Self::input(z)?)?;
        normalize_rows(h.data(), LATENT_ROWS, LATENT_COLS)
    }

    fn gradient(&self, z: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != LATENT_LEN {
            return Err(Error::Shape(format!(
                "upstream gradient needs {LATENT_LEN} entries, got {}",
                upstream.len()
            )));
        }
        let mut net = self.net.clone();
        net.zero_grad();
        let h = net.forward(&Self::input(z)?)?;
        let g_h = normalize_rows_backward(h.data(), upstream, LATENT_COLS)?;
        net.backward(&Tensor::new(vec![1, LATENT_LEN], g_h)?)?;
        Ok(net.params().flat_map(|p| p.grad().unwrap_or_default().to_vec()).collect())
    }

    fn sgd_step(&mut self, grad: &[f64], lr: f64) {
        let mut offset = 0;
        for p in self.net.params_mut() {
            let n = p.len();
            crate::nn::sgd_step(p.data_mut(), &grad[offset..offset + n], lr);
            offset += n;
        }
    }
}
