//! Shared oracles for the integration and acceptance tests.
#![allow(dead_code)]

use std::path::PathBuf;

use latentqgan::dataio::{load_mnist_dir, Dataset};
use latentqgan::eval::{fit_gaussian_with_ridge, frechet_distance, sqrtm_psd, GaussianStats};
use latentqgan::generator::{run_subgenerator, subgenerator_gradient, GeneratorConfig, GeneratorParams, NoiseVector};
use latentqgan::models::{random_decoder_samples, Autoencoder};
use latentqgan::nn::{bce_loss, mse_loss, Layer, LayerSpec, Tensor};
use latentqgan::training::{
    reconstruction_mse, stream_rng, streams, train_autoencoder, train_qgan, FdProbe, QganOutcome, TrainConfig,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_RTOL: f64 = 1e-4;
/// Differences below this are round-off of the central difference itself.
pub const GRAD_ATOL: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn subset_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-subset")
}

pub fn mnist_subset() -> Dataset {
    load_mnist_dir(&subset_dir()).expect("data/mnist-subset is checked in")
}

/// The official training files, when `LATENTQGAN_MNIST_DIR` points at them.
pub fn official_mnist() -> Option<Dataset> {
    let dir = std::env::var_os("LATENTQGAN_MNIST_DIR")?;
    Some(load_mnist_dir(&PathBuf::from(dir)).expect("LATENTQGAN_MNIST_DIR holds readable IDX files"))
}

// Dense-unitary circuit oracle. Qubit 0 is the leftmost Kronecker factor.

type CMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn ry(angle: f64) -> CMatrix {
    let (s, co) = (angle / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)])
}

fn on_qubit(gate: &CMatrix, q: usize, n: usize) -> CMatrix {
    let mut u = CMatrix::identity(1, 1);
    for k in 0..n {
        let factor = if k == q { gate.clone() } else { CMatrix::identity(2, 2) };
        u = u.kronecker(&factor);
    }
    u
}

fn cz(a: usize, b: usize, n: usize) -> CMatrix {
    let dim = 1 << n;
    let mut u = CMatrix::identity(dim, dim);
    for i in 0..dim {
        if (i >> (n - 1 - a)) & 1 == 1 && (i >> (n - 1 - b)) & 1 == 1 {
            u[(i, i)] = c(-1.0);
        }
    }
    u
}

/// Full circuit unitary for one sub-generator, built from explicit matrices.
pub fn dense_unitary(theta_t: &[f64], z: &[f64], n: usize) -> CMatrix {
    let mut u = CMatrix::identity(1 << n, 1 << n);
    for (q, &a) in z.iter().enumerate() {
        u = on_qubit(&ry(a), q, n) * u;
    }
    for layer in theta_t.chunks(n) {
        for (q, &a) in layer.iter().enumerate() {
            u = on_qubit(&ry(a), q, n) * u;
        }
        for q in 0..n - 1 {
            u = cz(q, q + 1, n) * u;
        }
    }
    u
}

/// Post-selected output row by brute force: apply the unitary to |0...0>,
/// keep outcomes whose trailing `n_ancilla` bits are zero, renormalize.
pub fn oracle_row(theta_t: &[f64], z: &[f64], n_data: usize, n_ancilla: usize) -> Vec<f64> {
    let n = n_data + n_ancilla;
    let u = dense_unitary(theta_t, z, n);
    let probs: Vec<f64> = (0..1 << n).map(|i| u[(i, 0)].norm_sqr()).collect();
    let kept: Vec<f64> = (0..1 << n)
        .filter(|i| i & ((1 << n_ancilla) - 1) == 0)
        .map(|i| probs[i])
        .collect();
    let mass: f64 = kept.iter().sum();
    kept.iter().map(|p| p / mass).collect()
}

/// Largest absolute deviation between the simulator and the oracle over
/// `instances` random circuits of every width up to `max_qubits`.
pub fn circuit_oracle_deviation(max_qubits: usize, instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let n = 2 + i % (max_qubits - 1);
        let n_ancilla = 1 + i % (n - 1).min(2);
        let n_data = n - n_ancilla;
        let n_layers = 1 + r.random_range(0..4);
        let config = GeneratorConfig::new(1, n_data, n_ancilla, n_layers).unwrap();
        let theta: Vec<f64> = (0..n * n_layers).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
        let z: Vec<f64> = (0..n).map(|_| r.random_range(0.0..std::f64::consts::PI)).collect();
        let got = run_subgenerator(&theta, &NoiseVector::new(z.clone()), &config).unwrap();
        let want = oracle_row(&theta, &z, n_data, n_ancilla);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

// Finite-difference gradient checking.

/// Largest per-coordinate relative error. The denominator is floored at
/// `GRAD_ATOL / GRAD_RTOL`, so coordinates whose absolute difference is
/// below [`GRAD_ATOL`] always score under [`GRAD_RTOL`].
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(GRAD_ATOL / GRAD_RTOL))
        .fold(0.0, f64::max)
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn uniform(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

/// Values bounded away from zero so ReLU kinks never fall inside a step.
fn away_from_zero(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v = r.random_range(0.05..1.0);
            if r.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Checks input and parameter gradients of one layer on the scalar
/// `f = sum(g * layer(x))` for a random upstream `g`.
pub fn layer_gradient_error(spec: &LayerSpec, input_shape: &[usize], r: &mut ChaCha8Rng) -> f64 {
    let mut layer = Layer::init(spec.clone(), r);
    for p in layer.params_mut() {
        let n = p.len();
        p.data_mut().copy_from_slice(&uniform(r, n, -0.5, 0.5));
    }
    let n_in: usize = input_shape.iter().product();
    let x = away_from_zero(r, n_in);
    let out_shape = spec.output_shape(input_shape).unwrap();
    let g = uniform(r, out_shape.iter().product(), -1.0, 1.0);
    let tensor = |data: &[f64]| Tensor::new(input_shape.to_vec(), data.to_vec()).unwrap();

    let mut work = layer.clone();
    work.forward(&tensor(&x)).unwrap();
    let dx = work.backward(&Tensor::new(out_shape, g.clone()).unwrap()).unwrap();

    let f_x = |xv: &[f64]| dot(&g, layer.clone().forward(&tensor(xv)).unwrap().data());
    let mut worst = max_rel_err(dx.data(), &central_difference(f_x, &x, FD_STEP));

    for (pi, p) in work.params().iter().enumerate() {
        let base = layer.params()[pi].data().to_vec();
        let f_p = |pv: &[f64]| {
            let mut l = layer.clone();
            l.params_mut()[pi].data_mut().copy_from_slice(pv);
            dot(&g, l.forward(&tensor(&x)).unwrap().data())
        };
        let numeric = central_difference(f_p, &base, FD_STEP);
        worst = worst.max(max_rel_err(p.grad().unwrap(), &numeric));
    }
    worst
}

/// Layer kinds with input shapes, covering every [`LayerSpec`] variant.
pub fn layer_cases() -> Vec<(LayerSpec, Vec<usize>)> {
    vec![
        (
            LayerSpec::Dense {
                inputs: 5,
                outputs: 4,
                bias: true,
            },
            vec![3, 5],
        ),
        (
            LayerSpec::Dense {
                inputs: 4,
                outputs: 3,
                bias: false,
            },
            vec![2, 4],
        ),
        (
            LayerSpec::Conv2d {
                in_channels: 2,
                out_channels: 3,
                kernel: 3,
                stride: 2,
                padding: 1,
            },
            vec![2, 2, 6, 5],
        ),
        (
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 2,
                kernel: 2,
                stride: 1,
                padding: 0,
            },
            vec![1, 1, 4, 4],
        ),
        (
            LayerSpec::ConvTranspose2d {
                in_channels: 3,
                out_channels: 2,
                kernel: 3,
                stride: 2,
                padding: 1,
                output_padding: 1,
            },
            vec![2, 3, 3, 4],
        ),
        (
            LayerSpec::ConvTranspose2d {
                in_channels: 2,
                out_channels: 1,
                kernel: 2,
                stride: 1,
                padding: 0,
                output_padding: 0,
            },
            vec![1, 2, 3, 3],
        ),
        (LayerSpec::Relu, vec![3, 7]),
        (LayerSpec::Sigmoid, vec![2, 9]),
        (LayerSpec::Flatten, vec![2, 2, 3, 2]),
        (LayerSpec::Reshape(vec![2, 3]), vec![2, 6]),
    ]
}

pub fn mse_gradient_error(r: &mut ChaCha8Rng) -> f64 {
    let shape = vec![3, 4];
    let p = uniform(r, 12, -1.0, 1.0);
    let target = Tensor::new(shape.clone(), uniform(r, 12, -1.0, 1.0)).unwrap();
    let t = |v: &[f64]| Tensor::new(shape.clone(), v.to_vec()).unwrap();
    let (_, g) = mse_loss(&t(&p), &target).unwrap();
    let numeric = central_difference(|v| mse_loss(&t(v), &target).unwrap().0, &p, FD_STEP);
    max_rel_err(g.data(), &numeric)
}

pub fn bce_gradient_error(r: &mut ChaCha8Rng) -> f64 {
    let shape = vec![6, 1];
    let p = uniform(r, 6, 0.05, 0.95);
    let labels: Vec<f64> = (0..6).map(|_| f64::from(u8::from(r.random::<bool>()))).collect();
    let labels = Tensor::new(shape.clone(), labels).unwrap();
    let t = |v: &[f64]| Tensor::new(shape.clone(), v.to_vec()).unwrap();
    let (_, g) = bce_loss(&t(&p), &labels).unwrap();
    let numeric = central_difference(|v| bce_loss(&t(v), &labels).unwrap().0, &p, FD_STEP);
    max_rel_err(g.data(), &numeric)
}

/// Parameter-shift gradient of `sum_j g_j G(theta, z)_j` against central
/// differences on a random small configuration.
pub fn subgenerator_gradient_error(r: &mut ChaCha8Rng) -> f64 {
    let n_ancilla = r.random_range(1..=2);
    let n_data = r.random_range(1..=3);
    let n_layers = r.random_range(1..=3);
    let config = GeneratorConfig::new(1, n_data, n_ancilla, n_layers).unwrap();
    let params = GeneratorParams::random(config.clone(), r).unwrap();
    let z = NoiseVector::new(uniform(r, config.n_qubits(), 0.0, std::f64::consts::PI));
    let g = uniform(r, config.row_len(), -1.0, 1.0);
    let analytic = subgenerator_gradient(params.as_slice(), &z, &config, &g).unwrap();
    let f = |theta: &[f64]| dot(&g, &run_subgenerator(theta, &z, &config).unwrap());
    max_rel_err(&analytic, &central_difference(f, params.as_slice(), FD_STEP))
}

// Desk-scale pipeline shared by the acceptance run and the determinism check.

/// Seed of the fixed train / held-out shuffle of the subset.
pub const SPLIT_SEED: u64 = 6;

/// Disjoint `(train, held_out)` slices of a seeded shuffle of `data`.
pub fn split(data: &Dataset, n_train: usize, n_held: usize) -> (Dataset, Dataset) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut rng(SPLIT_SEED));
    let train = data.subset(&idx[..n_train]).unwrap();
    let held = data.subset(&idx[n_train..n_train + n_held]).unwrap();
    (train, held)
}

pub struct AeRun {
    pub ae: Autoencoder,
    pub curve: Vec<f64>,
    pub held_out_mse: f64,
}

pub fn run_autoencoder(train: &Dataset, held: &Dataset, config: &TrainConfig) -> AeRun {
    let mut ae = Autoencoder::new(&mut stream_rng(config.seed, streams::AE_INIT));
    let curve = train_autoencoder(&mut ae, train, config).unwrap();
    let held_out_mse = reconstruction_mse(&ae, held).unwrap();
    AeRun { ae, curve, held_out_mse }
}

pub fn run_qgan(data: &Dataset, ae: &Autoencoder, config: &TrainConfig) -> QganOutcome<GeneratorParams> {
    let init = GeneratorParams::random(GeneratorConfig::default(), &mut stream_rng(config.seed, streams::GENERATOR_INIT))
        .unwrap();
    train_qgan(init, data, ae, config).unwrap()
}

/// RandomDecoder FD on the probe `train_qgan` uses for the same config.
pub fn random_decoder_fd(data: &Dataset, ae: &Autoencoder, config: &TrainConfig) -> f64 {
    let class_data = data.filter_class(config.class_label).unwrap();
    let any = GeneratorParams::zeros(GeneratorConfig::default()).unwrap();
    let probe = FdProbe::new(&class_data, &any, config.fd_samples, config.seed).unwrap();
    let images =
        random_decoder_samples(ae, probe.n_gen(), &mut stream_rng(config.seed, streams::BASELINE)).unwrap();
    probe.images_fd(&images).unwrap()
}

/// Every encoder and decoder scalar, for bitwise before/after comparisons.
pub fn ae_params(ae: &Autoencoder) -> Vec<u64> {
    ae.encoder()
        .params()
        .chain(ae.decoder().params())
        .flat_map(|t| t.data().iter().map(|v| v.to_bits()))
        .collect()
}

/// Longest run of consecutive values within `tol` of `target`.
pub fn longest_run_near(values: &[f64], target: f64, tol: f64) -> usize {
    let mut best = 0;
    let mut run = 0;
    for v in values {
        run = if (v - target).abs() <= tol { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

// FD oracles.

pub fn stats_1d(mu: f64, var: f64) -> GaussianStats {
    GaussianStats {
        mu: DVector::from_element(1, mu),
        sigma: DMatrix::from_element(1, 1, var),
    }
}

pub fn random_psd(r: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
    b.transpose() * b
}

/// Relative Frobenius error of `sqrtm_psd(a)^2` against `a`.
pub fn sqrtm_reconstruction_error(a: &DMatrix<f64>) -> f64 {
    let root = sqrtm_psd(a).unwrap();
    (&root * &root - a).norm() / a.norm()
}

pub fn random_stats(r: &mut ChaCha8Rng, n: usize, d: usize) -> GaussianStats {
    let samples: Vec<Vec<f64>> = (0..n).map(|_| uniform(r, d, -1.0, 1.0)).collect();
    fit_gaussian_with_ridge(&samples, 1e-6).unwrap()
}

pub fn fd(a: &GaussianStats, b: &GaussianStats) -> f64 {
    frechet_distance(a, b).unwrap()
}
