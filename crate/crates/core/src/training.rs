//! Autoencoder pretraining and per-class adversarial training.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::csv::{optional, FdRow};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::eval::{fit_gaussian, FrechetReference};
use crate::models::{Autoencoder, Discriminator, LatentGenerator, IMAGE_PIXELS};
use crate::nn::{bce_loss, mse_loss, Tensor};

/// Independent ChaCha streams derived from one seed.
pub mod streams {
    pub const GENERATOR_INIT: u64 = 0;
    pub const DISCRIMINATOR_INIT: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const REAL_SAMPLES: u64 = 3;
    pub const EVAL_NOISE: u64 = 4;
    pub const EVAL_REAL: u64 = 5;
    pub const AE_INIT: u64 = 6;
    pub const AE_SHUFFLE: u64 = 7;
    pub const BASELINE: u64 = 8;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Reduction of the autoencoder's squared error over pixels. Both average
/// over the minibatch; they differ in gradient scale by a factor of 784.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReconstructionLoss {
    /// Mean over every pixel of the batch.
    PixelMean,
    /// Sum over the pixels of each image.
    PixelSum,
}

impl ReconstructionLoss {
    pub fn name(self) -> &'static str {
        match self {
            ReconstructionLoss::PixelMean => "pixel-mean",
            ReconstructionLoss::PixelSum => "pixel-sum",
        }
    }
}

impl std::str::FromStr for ReconstructionLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pixel-mean" => Ok(ReconstructionLoss::PixelMean),
            "pixel-sum" => Ok(ReconstructionLoss::PixelSum),
            _ => Err(Error::Domain(format!("unknown reconstruction loss {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub ae_lr: f64,
    /// Objective the autoencoder descends; the reported curve is always the
    /// per-pixel mean.
    pub ae_loss: ReconstructionLoss,
    pub ae_batch: usize,
    pub ae_epochs: usize,
    pub gen_lr: f64,
    pub disc_lr: f64,
    pub gan_batch: usize,
    pub gan_iterations: usize,
    pub class_label: u8,
    pub seed: u64,
    /// FD snapshot interval in iterations.
    pub eval_every: usize,
    /// Generated and real images per FD snapshot.
    pub fd_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ae_lr: 0.05,
            ae_loss: ReconstructionLoss::PixelSum,
            ae_batch: 20,
            ae_epochs: 100,
            gen_lr: 0.3,
            disc_lr: 0.01,
            gan_batch: 1,
            gan_iterations: 490,
            class_label: 0,
            seed: 0,
            eval_every: 10,
            fd_samples: 200,
        }
    }
}

impl TrainConfig {
    /// Rejects negative or non-finite rates, empty batches, a zero FD interval
    /// and fewer than two FD samples. Zero rates and zero iteration counts are
    /// accepted and make the corresponding phase a no-op.
    pub fn validate(&self) -> Result<()> {
        for (name, lr) in [("ae_lr", self.ae_lr), ("gen_lr", self.gen_lr), ("disc_lr", self.disc_lr)] {
            if !lr.is_finite() || lr < 0.0 {
                return Err(Error::Domain(format!("{name} must be finite and non-negative, got {lr}")));
            }
        }
        if self.ae_batch == 0 || self.gan_batch == 0 {
            return Err(Error::Domain("batch sizes must be at least 1".into()));
        }
        if self.class_label > 9 {
            return Err(Error::Domain(format!("class {} is outside 0-9", self.class_label)));
        }
        if self.eval_every == 0 {
            return Err(Error::Domain("eval_every must be at least 1".into()));
        }
        if self.fd_samples < 2 {
            return Err(Error::Domain("fd_samples must be at least 2".into()));
        }
        Ok(())
    }
}

/// Minibatch SGD on the reconstruction error. Returns the mean per-pixel
/// squared error of each epoch.
pub fn train_autoencoder(ae: &mut Autoencoder, data: &Dataset, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Data("autoencoder training set is empty".into()));
    }
    let mut rng = stream_rng(config.seed, streams::AE_SHUFFLE);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(config.ae_epochs);
    for _ in 0..config.ae_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.ae_batch) {
            let images: Vec<&[f64]> = batch.iter().map(|&i| data.image(i)).collect();
            let target = Tensor::new(vec![images.len(), 1, 28, 28], images.concat())?;
            ae.zero_grad();
            let recon = ae.forward(&images)?;
            let (loss, mut grad) = mse_loss(&recon, &target)?;
            if config.ae_loss == ReconstructionLoss::PixelSum {
                grad.data_mut().iter_mut().for_each(|g| *g *= IMAGE_PIXELS as f64);
            }
            ae.backward(&grad)?;
            ae.sgd_step(config.ae_lr);
            total += loss * batch.len() as f64;
        }
        curve.push(total / data.len() as f64);
    }
    Ok(curve)
}

const INFERENCE_CHUNK: usize = 250;

/// Mean per-pixel squared reconstruction error.
pub fn reconstruction_mse(ae: &Autoencoder, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Data("evaluation set is empty".into()));
    }
    let images: Vec<&[f64]> = data.images().collect();
    let mut sum = 0.0;
    for chunk in images.chunks(INFERENCE_CHUNK) {
        let recon = ae.decode_batch(&ae.encode_batch(chunk)?)?;
        for (x, y) in chunk.iter().zip(&recon) {
            sum += x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    Ok(sum / (data.len() * IMAGE_PIXELS) as f64)
}

fn bce_against(disc: &mut Discriminator, latent: &[f64], label: f64, scale: f64) -> Result<(f64, Vec<f64>)> {
    let out = disc.forward(latent)?;
    let (loss, mut grad) = bce_loss(&out, &Tensor::full(vec![1, 1], label))?;
    grad.data_mut()[0] *= scale;
    Ok((loss, disc.backward(&grad)?))
}

/// One SGD step on the mean over the batch of `BCE(D(real), 1) + BCE(D(fake), 0)`.
/// Returns the loss before the step.
pub fn discriminator_step_batch(disc: &mut Discriminator, reals: &[&[f64]], fakes: &[&[f64]], lr: f64) -> Result<f64> {
    if reals.is_empty() || reals.len() != fakes.len() {
        return Err(Error::Shape(format!(
            "discriminator batch needs matching non-empty real ({}) and fake ({}) sets",
            reals.len(),
            fakes.len()
        )));
    }
    let scale = 1.0 / reals.len() as f64;
    disc.net_mut().zero_grad();
    let mut total = 0.0;
    for (real, fake) in reals.iter().zip(fakes) {
        total += bce_against(disc, real, 1.0, scale)?.0;
        total += bce_against(disc, fake, 0.0, scale)?.0;
    }
    disc.net_mut().sgd_step(lr);
    Ok(total * scale)
}

pub fn discriminator_step(disc: &mut Discriminator, real: &[f64], fake: &[f64], lr: f64) -> Result<f64> {
    discriminator_step_batch(disc, &[real], &[fake], lr)
}

/// One SGD step of the generator on the non-saturating loss
/// `BCE(D(G(z)), 1)` averaged over the batch, with `disc` held fixed.
/// Returns the loss before the step.
pub fn generator_step_batch<G: LatentGenerator + ?Sized>(
    generator: &mut G,
    disc: &Discriminator,
    zs: &[Vec<f64>],
    lr: f64,
) -> Result<f64> {
    if zs.is_empty() {
        return Err(Error::Shape("generator batch is empty".into()));
    }
    let scale = 1.0 / zs.len() as f64;
    let mut frozen = disc.clone();
    let mut grad = vec![0.0; generator.param_count()];
    let mut total = 0.0;
    for z in zs {
        let fake = generator.generate(z)?;
        let (loss, g_latent) = bce_against(&mut frozen, fake.as_slice(), 1.0, scale)?;
        for (acc, g) in grad.iter_mut().zip(generator.gradient(z, &g_latent)?) {
            *acc += g;
        }
        total += loss;
    }
    generator.sgd_step(&grad, lr);
    Ok(total * scale)
}

pub fn generator_step<G: LatentGenerator + ?Sized>(
    generator: &mut G,
    disc: &Discriminator,
    z: &[f64],
    lr: f64,
) -> Result<f64> {
    generator_step_batch(generator, disc, &[z.to_vec()], lr)
}

/// Fixed real-side statistics and generator noise for comparable FD snapshots.
#[derive(Clone, Debug)]
pub struct FdProbe {
    reference: FrechetReference,
    n_real: usize,
    noise: Vec<Vec<f64>>,
}

impl FdProbe {
    /// Uses up to `samples` real images drawn without replacement, and
    /// `samples` noise vectors, all derived from `seed`.
    pub fn new<G: LatentGenerator + ?Sized>(class_data: &Dataset, generator: &G, samples: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, streams::EVAL_REAL);
        let mut idx: Vec<usize> = (0..class_data.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(samples);
        let real: Vec<&[f64]> = idx.iter().map(|&i| class_data.image(i)).collect();
        let reference = FrechetReference::new(fit_gaussian(&real)?)?;
        let mut noise_rng = stream_rng(seed, streams::EVAL_NOISE);
        let noise = (0..samples).map(|_| generator.sample_noise(&mut noise_rng)).collect();
        Ok(Self {
            reference,
            n_real: real.len(),
            noise,
        })
    }

    pub fn n_real(&self) -> usize {
        self.n_real
    }

    pub fn n_gen(&self) -> usize {
        self.noise.len()
    }

    pub fn images_fd<S: AsRef<[f64]>>(&self, images: &[S]) -> Result<f64> {
        self.reference.distance(&fit_gaussian(images)?)
    }

    /// Decoded generator samples on the probe's fixed noise.
    pub fn generated_images<G: LatentGenerator + ?Sized>(&self, generator: &G, ae: &Autoencoder) -> Result<Vec<Vec<f64>>> {
        let latents = self.noise.iter().map(|z| generator.generate(z)).collect::<Result<Vec<_>>>()?;
        ae.decode_batch(&latents)
    }

    pub fn generator_fd<G: LatentGenerator + ?Sized>(&self, generator: &G, ae: &Autoencoder) -> Result<f64> {
        self.images_fd(&self.generated_images(generator, ae)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanRecord {
    pub iteration: usize,
    pub loss_d: Option<f64>,
    pub loss_g: Option<f64>,
    pub fd: Option<f64>,
    pub elapsed: Duration,
}

/// Row 0 is the untrained state (no losses, initial FD); row `i` holds the
/// losses of iteration `i` and an FD snapshot when `i` is a multiple of
/// `eval_every`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    pub class: u8,
    pub n_real: usize,
    pub n_gen: usize,
    pub records: Vec<GanRecord>,
}

impl TrainTrace {
    /// `iter,loss_d,loss_g,fd`; wall-clock time is left out so seeded runs
    /// produce identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,loss_d,loss_g,fd\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.iteration,
                optional(r.loss_d),
                optional(r.loss_g),
                optional(r.fd)
            );
        }
        out
    }

    pub fn fd_rows(&self) -> Vec<FdRow> {
        self.records
            .iter()
            .filter_map(|r| {
                r.fd.map(|fd| FdRow {
                    class: self.class,
                    iteration: Some(r.iteration),
                    n_real: self.n_real,
                    n_gen: self.n_gen,
                    fd,
                })
            })
            .collect()
    }

    pub fn fd_at(&self, iteration: usize) -> Option<f64> {
        self.records.iter().find(|r| r.iteration == iteration).and_then(|r| r.fd)
    }

    pub fn final_fd(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.fd)
    }
}

pub struct QganOutcome<G> {
    pub generator: G,
    pub discriminator: Discriminator,
    pub trace: TrainTrace,
}

/// Adversarial training of `generator` on the latents of one class, one
/// discriminator step then one generator step per iteration, both at the
/// same fresh noise. The autoencoder is only read.
pub fn train_qgan<G: LatentGenerator>(
    mut generator: G,
    data: &Dataset,
    ae: &Autoencoder,
    config: &TrainConfig,
) -> Result<QganOutcome<G>> {
    config.validate()?;
    let class_data = data.filter_class(config.class_label)?;
    let start = Instant::now();

    let images: Vec<&[f64]> = class_data.images().collect();
    let mut real_latents = Vec::with_capacity(images.len());
    for chunk in images.chunks(INFERENCE_CHUNK) {
        real_latents.extend(ae.encode_batch(chunk)?);
    }

    let mut disc = Discriminator::new(&mut stream_rng(config.seed, streams::DISCRIMINATOR_INIT));
    let mut noise_rng = stream_rng(config.seed, streams::NOISE);
    let mut real_rng = stream_rng(config.seed, streams::REAL_SAMPLES);
    let probe = FdProbe::new(&class_data, &generator, config.fd_samples, config.seed)?;

    let mut records = vec![GanRecord {
        iteration: 0,
        loss_d: None,
        loss_g: None,
        fd: Some(probe.generator_fd(&generator, ae)?),
        elapsed: start.elapsed(),
    }];
    for iteration in 1..=config.gan_iterations {
        let zs: Vec<Vec<f64>> = (0..config.gan_batch).map(|_| generator.sample_noise(&mut noise_rng)).collect();
        let fakes = zs.iter().map(|z| generator.generate(z)).collect::<Result<Vec<_>>>()?;
        let reals: Vec<&[f64]> = (0..config.gan_batch)
            .map(|_| real_latents[real_rng.random_range(0..real_latents.len())].as_slice())
            .collect();
        let fake_refs: Vec<&[f64]> = fakes.iter().map(|f| f.as_slice()).collect();
        let loss_d = discriminator_step_batch(&mut disc, &reals, &fake_refs, config.disc_lr)?;
        let loss_g = generator_step_batch(&mut generator, &disc, &zs, config.gen_lr)?;
        if !loss_d.is_finite() || !loss_g.is_finite() {
            return Err(Error::Domain(format!("non-finite loss at iteration {iteration}")));
        }
        let fd = if iteration % config.eval_every == 0 {
            Some(probe.generator_fd(&generator, ae)?)
        } else {
            None
        };
        records.push(GanRecord {
            iteration,
            loss_d: Some(loss_d),
            loss_g: Some(loss_g),
            fd,
            elapsed: start.elapsed(),
        });
    }
    Ok(QganOutcome {
        generator,
        discriminator: disc,
        trace: TrainTrace {
            class: config.class_label,
            n_real: probe.n_real(),
            n_gen: probe.n_gen(),
            records,
        },
    })
}
