mod support;

use latentqgan::generator::{generator_gradient, run_generator, EvalMode, GeneratorConfig, GeneratorParams, NoiseVector};
use latentqgan::models::{normalize_rows, normalize_rows_backward, Autoencoder, Discriminator, LATENT_LEN};
use latentqgan::nn::{bce_loss, mse_loss, LayerSpec, Sequential, Tensor};
use rand::Rng;
use support::*;

#[test]
fn every_layer_kind_matches_finite_differences() {
    let mut r = rng(21);
    for (spec, shape) in layer_cases() {
        for _ in 0..20 {
            let err = layer_gradient_error(&spec, &shape, &mut r);
            assert!(err < GRAD_RTOL, "{spec:?} on {shape:?}: rel err {err:e}");
        }
    }
}

#[test]
fn losses_match_finite_differences() {
    let mut r = rng(22);
    for _ in 0..20 {
        assert!(mse_gradient_error(&mut r) < GRAD_RTOL);
        assert!(bce_gradient_error(&mut r) < GRAD_RTOL);
    }
}

#[test]
fn subgenerator_chain_matches_finite_differences_on_50_configs() {
    let mut r = rng(23);
    for k in 0..50 {
        let err = subgenerator_gradient_error(&mut r);
        assert!(err < GRAD_RTOL, "config {k}: rel err {err:e}");
    }
}

#[test]
fn multi_row_generator_gradient_matches_finite_differences() {
    let mut r = rng(24);
    let config = GeneratorConfig::new(3, 2, 1, 2).unwrap();
    let params = GeneratorParams::random(config.clone(), &mut r).unwrap();
    let z = NoiseVector::new((0..3).map(|_| r.random_range(0.0..3.0)).collect());
    let g: Vec<f64> = (0..12).map(|_| r.random_range(-1.0..1.0)).collect();
    let analytic = generator_gradient(&params, &z, &g, EvalMode::Analytic).unwrap();
    let f = |theta: &[f64]| {
        let p = GeneratorParams::new(config.clone(), theta.to_vec()).unwrap();
        run_generator(&p, &z).unwrap().as_slice().iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
    };
    let err = max_rel_err(&analytic, &central_difference(f, params.as_slice(), FD_STEP));
    assert!(err < GRAD_RTOL, "rel err {err:e}");
}

#[test]
fn row_normalization_matches_finite_differences() {
    let mut r = rng(25);
    for _ in 0..20 {
        let h: Vec<f64> = (0..LATENT_LEN).map(|_| r.random_range(0.1..2.0)).collect();
        let g: Vec<f64> = (0..LATENT_LEN).map(|_| r.random_range(-1.0..1.0)).collect();
        let analytic = normalize_rows_backward(&h, &g, 8).unwrap();
        let f = |x: &[f64]| normalize_rows(x, 5, 8).unwrap().as_slice().iter().zip(&g).map(|(a, b)| a * b).sum();
        assert!(max_rel_err(&analytic, &central_difference(f, &h, FD_STEP)) < GRAD_RTOL);
    }
}

#[test]
fn discriminator_matches_finite_differences() {
    let mut r = rng(26);
    let disc = Discriminator::new(&mut r);
    let x: Vec<f64> = normalize_rows(&(0..LATENT_LEN).map(|_| r.random::<f64>()).collect::<Vec<_>>(), 5, 8)
        .unwrap()
        .into_vec();
    for label in [0.0, 1.0] {
        let labels = Tensor::full(vec![1, 1], label);
        let loss = |d: &Discriminator, input: &[f64]| bce_loss(&d.clone().forward(input).unwrap(), &labels).unwrap().0;

        let mut work = disc.clone();
        work.net_mut().zero_grad();
        let (_, grad) = bce_loss(&work.forward(&x).unwrap(), &labels).unwrap();
        let dx = work.backward(&grad).unwrap();
        let err = max_rel_err(&dx, &central_difference(|v| loss(&disc, v), &x, FD_STEP));
        assert!(err < GRAD_RTOL, "input gradient rel err {err:e}");

        for (li, layer) in work.net().layers().iter().enumerate() {
            for (pi, p) in layer.params().iter().enumerate() {
                let base = disc.net().layers()[li].params()[pi].data().to_vec();
                let f = |v: &[f64]| {
                    let mut d = disc.clone();
                    d.net_mut().layers_mut()[li].params_mut()[pi].data_mut().copy_from_slice(v);
                    loss(&d, &x)
                };
                let err = max_rel_err(p.grad().unwrap(), &central_difference(f, &base, FD_STEP));
                assert!(err < GRAD_RTOL, "layer {li} param {pi}: rel err {err:e}");
            }
        }
    }
}

/// Flat (tensor, index) coordinates of every autoencoder parameter.
fn coordinates(ae: &Autoencoder) -> Vec<(bool, usize, usize)> {
    let mut out = Vec::new();
    for (decoder, net) in [(false, ae.encoder()), (true, ae.decoder())] {
        for (ti, t) in net.params().enumerate() {
            out.extend((0..t.len()).map(|i| (decoder, ti, i)));
        }
    }
    out
}

fn nudge(ae: &mut Autoencoder, (decoder, ti, i): (bool, usize, usize), delta: f64) {
    let net = if decoder { ae.decoder_mut() } else { ae.encoder_mut() };
    net.params_mut().nth(ti).unwrap().data_mut()[i] += delta;
}

#[test]
fn autoencoder_backprop_matches_finite_differences_on_sampled_coordinates() {
    let mut r = rng(27);
    let ae = Autoencoder::new(&mut r);
    let images: Vec<Vec<f64>> = (0..2).map(|_| (0..784).map(|_| r.random::<f64>()).collect()).collect();
    let refs: Vec<&[f64]> = images.iter().map(Vec::as_slice).collect();
    let target = Tensor::new(vec![2, 1, 28, 28], images.concat()).unwrap();
    let loss = |ae: &Autoencoder| mse_loss(&ae.clone().forward(&refs).unwrap(), &target).unwrap().0;

    let mut work = ae.clone();
    work.zero_grad();
    let (_, grad) = mse_loss(&work.forward(&refs).unwrap(), &target).unwrap();
    work.backward(&grad).unwrap();
    let grads: Vec<Vec<f64>> = work
        .encoder()
        .params()
        .chain(work.decoder().params())
        .map(|t| t.grad().unwrap().to_vec())
        .collect();
    let n_encoder = work.encoder().params().count();

    let coords = coordinates(&ae);
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for _ in 0..60 {
        let c = coords[r.random_range(0..coords.len())];
        let flat = if c.0 { n_encoder + c.1 } else { c.1 };
        analytic.push(grads[flat][c.2]);
        let (mut up, mut down) = (ae.clone(), ae.clone());
        nudge(&mut up, c, FD_STEP);
        nudge(&mut down, c, -FD_STEP);
        numeric.push((loss(&up) - loss(&down)) / (2.0 * FD_STEP));
    }
    let err = max_rel_err(&analytic, &numeric);
    assert!(err < GRAD_RTOL, "rel err {err:e}");
}

#[test]
fn generator_loss_gradient_end_to_end_on_a_tiny_config() {
    let mut r = rng(28);
    let config = GeneratorConfig::new(1, 2, 1, 1).unwrap();
    let params = GeneratorParams::random(config.clone(), &mut r).unwrap();
    let z = NoiseVector::new((0..3).map(|_| r.random_range(0.0..3.0)).collect());
    let disc = Sequential::init(
        vec![
            LayerSpec::Dense {
                inputs: 4,
                outputs: 6,
                bias: true,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                inputs: 6,
                outputs: 1,
                bias: true,
            },
            LayerSpec::Sigmoid,
        ],
        &mut r,
    );
    let real = Tensor::full(vec![1, 1], 1.0);
    let loss_of = |theta: &[f64]| {
        let p = GeneratorParams::new(config.clone(), theta.to_vec()).unwrap();
        let fake = run_generator(&p, &z).unwrap().into_vec();
        bce_loss(&disc.infer(&Tensor::new(vec![1, 4], fake).unwrap()).unwrap(), &real).unwrap().0
    };

    let mut frozen = disc.clone();
    let fake = run_generator(&params, &z).unwrap().into_vec();
    let (_, grad) = bce_loss(&frozen.forward(&Tensor::new(vec![1, 4], fake).unwrap()).unwrap(), &real).unwrap();
    let upstream = frozen.backward(&grad).unwrap();
    let analytic = generator_gradient(&params, &z, upstream.data(), EvalMode::Analytic).unwrap();
    let err = max_rel_err(&analytic, &central_difference(loss_of, params.as_slice(), FD_STEP));
    assert!(err < 1e-3, "rel err {err:e}");
}

#[test]
fn checker_rejects_a_slightly_wrong_gradient() {
    let x = [0.3f64, -1.2, 2.0];
    let f = |v: &[f64]| v.iter().map(|t: &f64| t.sin()).sum::<f64>();
    let exact: Vec<f64> = x.iter().map(|t| t.cos()).collect();
    let numeric = central_difference(f, &x, FD_STEP);
    assert!(max_rel_err(&exact, &numeric) < GRAD_RTOL);
    let off: Vec<f64> = exact.iter().map(|g| g * 1.01).collect();
    assert!(max_rel_err(&off, &numeric) > GRAD_RTOL);
}
