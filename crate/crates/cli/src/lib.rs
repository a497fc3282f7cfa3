//! Command-line front end: autoencoder pretraining, per-class GAN training,
//! sampling, FD reports and the random-decoder baseline.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use latentqgan::dataio::csv::{fd_csv, loss_curve_csv, FdRow};
use latentqgan::dataio::pgm::load_image_grid;
use latentqgan::dataio::{load_checkpoint, load_mnist_dir, save_checkpoint, save_image_grid, write_atomic, Checkpoint};
use latentqgan::eval::fd_pixels;
use latentqgan::generator::{run_generator_mode, EvalMode, GeneratorConfig, GeneratorParams, NoiseVector};
use latentqgan::models::{random_decoder_samples, Autoencoder, ClassicalGenerator};
use latentqgan::training::{
    reconstruction_mse, stream_rng, streams, train_autoencoder, train_qgan, ReconstructionLoss, TrainConfig,
};
use latentqgan::{Error, Result};

const DEFAULT_DATA: &str = "data/mnist-subset";

#[derive(Parser, Debug)]
#[command(name = "latentqgan", version, about = "Latent patch quantum GAN on MNIST", arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the autoencoder on all classes.
    TrainAe(TrainAe),
    /// Train a latent generator on one class against a fresh discriminator.
    TrainQgan(TrainQgan),
    /// Decode generator samples into a PGM grid.
    Generate(Generate),
    /// Pixel-space FD between real class images and PGM grids.
    Fd(Fd),
    /// Baseline generators.
    #[command(subcommand)]
    Baseline(Baseline),
}

#[derive(Args, Debug)]
struct TrainAe {
    #[arg(long, default_value = DEFAULT_DATA)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train on the first N images only.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value = "pixel-sum", value_parser = ["pixel-sum", "pixel-mean"])]
    ae_loss: String,
    /// Per-epoch loss CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GeneratorChoice {
    Quantum,
    Classical,
}

#[derive(Args, Debug)]
struct TrainQgan {
    #[arg(long)]
    ae: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=9))]
    class: u8,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 490)]
    iters: usize,
    #[arg(long, default_value_t = 0.3)]
    gen_lr: f64,
    #[arg(long, default_value_t = 0.01)]
    disc_lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = GeneratorChoice::Quantum)]
    generator: GeneratorChoice,
    #[arg(long, default_value = DEFAULT_DATA)]
    data: PathBuf,
    #[arg(long, default_value_t = 10)]
    eval_every: usize,
    #[arg(long, default_value_t = 200)]
    fd_samples: usize,
}

#[derive(Args, Debug)]
struct Generate {
    #[arg(long)]
    ae: PathBuf,
    #[arg(long)]
    gen: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
    /// Estimate circuit outputs from this many shots instead of exactly.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    cols: usize,
}

#[derive(Args, Debug)]
struct Fd {
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=9))]
    real_class: u8,
    #[arg(long, num_args = 1.., required = true)]
    gen_images: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = DEFAULT_DATA)]
    data: PathBuf,
    /// Iteration to record in the report.
    #[arg(long)]
    iteration: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Baseline {
    /// Decode uniform row-normalized latents.
    RandomDecoder {
        #[arg(long)]
        ae: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        cols: usize,
    },
}

fn load_autoencoder(path: &Path) -> Result<Autoencoder> {
    load_checkpoint(path)?.to_autoencoder()
}

fn train_ae(a: TrainAe) -> Result<String> {
    let mut data = load_mnist_dir(&a.data)?;
    if let Some(n) = a.limit {
        let n = n.min(data.len());
        data = data.subset(&(0..n).collect::<Vec<_>>())?;
    }
    let ae_loss: ReconstructionLoss = a.ae_loss.parse()?;
    let config = TrainConfig {
        ae_lr: a.lr,
        ae_loss,
        ae_batch: a.batch,
        ae_epochs: a.epochs,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let mut ae = Autoencoder::new(&mut stream_rng(a.seed, streams::AE_INIT));
    let curve = train_autoencoder(&mut ae, &data, &config)?;
    let mse = reconstruction_mse(&ae, &data)?;
    let ckpt = Checkpoint::from_autoencoder(&ae, a.seed)
        .with_config("ae_loss", ae_loss.name())
        .with_config("batch", a.batch)
        .with_config("epochs", a.epochs)
        .with_config("images", data.len())
        .with_config("lr", a.lr);
    save_checkpoint(&ckpt, &a.out)?;
    if let Some(path) = &a.curve {
        write_atomic(path, loss_curve_csv(&curve).as_bytes())?;
    }
    Ok(format!(
        "trained autoencoder on {} images for {} epochs, reconstruction MSE {mse:.5}",
        data.len(),
        a.epochs
    ))
}

fn train_qgan_cmd(a: TrainQgan) -> Result<String> {
    let data = load_mnist_dir(&a.data)?;
    let ae = load_autoencoder(&a.ae)?;
    let config = TrainConfig {
        gen_lr: a.gen_lr,
        disc_lr: a.disc_lr,
        gan_iterations: a.iters,
        class_label: a.class,
        seed: a.seed,
        eval_every: a.eval_every,
        fd_samples: a.fd_samples,
        ..TrainConfig::default()
    };
    let mut init = stream_rng(a.seed, streams::GENERATOR_INIT);
    let (ckpt, trace) = match a.generator {
        GeneratorChoice::Quantum => {
            let g = GeneratorParams::random(GeneratorConfig::default(), &mut init)?;
            let out = train_qgan(g, &data, &ae, &config)?;
            (Checkpoint::from_quantum(&out.generator, a.seed), out.trace)
        }
        GeneratorChoice::Classical => {
            let out = train_qgan(ClassicalGenerator::new(&mut init), &data, &ae, &config)?;
            (Checkpoint::from_classical(&out.generator, a.seed), out.trace)
        }
    };
    let ckpt = ckpt
        .with_config("class", a.class)
        .with_config("disc_lr", a.disc_lr)
        .with_config("eval_every", a.eval_every)
        .with_config("fd_samples", a.fd_samples)
        .with_config("gen_lr", a.gen_lr)
        .with_config("iters", a.iters);
    save_checkpoint(&ckpt, &a.out)?;
    write_atomic(&a.trace, trace.to_csv().as_bytes())?;
    let fd = |i| trace.fd_at(i).map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    Ok(format!(
        "trained {} on class {} for {} iterations, FD {} -> {}",
        ckpt.model_kind.name(),
        a.class,
        a.iters,
        fd(0),
        trace.final_fd().map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
    ))
}

fn generate(a: Generate) -> Result<String> {
    if a.count == 0 {
        return Err(Error::SampleSize("--count must be at least 1".into()));
    }
    let ae = load_autoencoder(&a.ae)?;
    let ckpt = load_checkpoint(&a.gen)?;
    let generator = ckpt.to_generator()?;
    let mut noise_rng = stream_rng(a.seed, streams::NOISE);
    let zs: Vec<Vec<f64>> = (0..a.count).map(|_| generator.sample_noise(&mut noise_rng)).collect();
    let latents = match a.shots {
        None => zs.iter().map(|z| generator.generate(z)).collect::<Result<Vec<_>>>()?,
        Some(shots) => {
            let params = ckpt.to_quantum().map_err(|_| {
                Error::UnsupportedMode(format!("--shots needs a quantum generator, got a {}", ckpt.model_kind.name()))
            })?;
            zs.iter()
                .enumerate()
                .map(|(i, z)| {
                    let seed = a.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
                    run_generator_mode(&params, &NoiseVector::new(z.clone()), EvalMode::Shots(shots), seed)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let images = ae.decode_batch(&latents)?;
    save_image_grid(&images, a.cols, &a.out)?;
    let mode = a.shots.map_or_else(|| "analytic".to_string(), |s| format!("{s} shots"));
    Ok(format!("wrote {} images ({mode}) to {}", images.len(), a.out.display()))
}

fn fd(a: Fd) -> Result<String> {
    let real = load_mnist_dir(&a.data)?.filter_class(a.real_class)?;
    let mut generated = Vec::new();
    for path in &a.gen_images {
        generated.extend(load_image_grid(path)?);
    }
    let real_images: Vec<&[f64]> = real.images().collect();
    let report = fd_pixels(&real_images, &generated)?;
    let row = FdRow {
        class: a.real_class,
        iteration: a.iteration,
        n_real: report.n_real,
        n_gen: report.n_gen,
        fd: report.fd,
    };
    write_atomic(&a.out, fd_csv(&[row]).as_bytes())?;
    Ok(format!(
        "FD {:.4} between {} real class-{} images and {} generated",
        report.fd, report.n_real, a.real_class, report.n_gen
    ))
}

fn baseline(b: Baseline) -> Result<String> {
    let Baseline::RandomDecoder {
        ae,
        count,
        out,
        seed,
        cols,
    } = b;
    if count == 0 {
        return Err(Error::SampleSize("--count must be at least 1".into()));
    }
    let ae = load_autoencoder(&ae)?;
    let images = random_decoder_samples(&ae, count, &mut stream_rng(seed, streams::BASELINE))?;
    save_image_grid(&images, cols, &out)?;
    Ok(format!("wrote {count} random-decoder images to {}", out.display()))
}

fn dispatch(cli: Cli) -> Result<String> {
    match cli.command {
        Command::TrainAe(a) => train_ae(a),
        Command::TrainQgan(a) => train_qgan_cmd(a),
        Command::Generate(a) => generate(a),
        Command::Fd(a) => fd(a),
        Command::Baseline(b) => baseline(b),
    }
}

/// Parses `argv` and runs the command. Returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on any other failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            let mut msg = e.to_string();
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                if !msg.contains(&s.to_string()) {
                    msg.push_str(&format!(": {s}"));
                }
                source = s.source();
            }
            eprintln!("error: {msg}");
            1
        }
    }
}
