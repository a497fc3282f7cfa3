//! Line-oriented text checkpoints.
//!
//! ```text
//! LATENTQGAN-CHECKPOINT
//! format_version 1
//! model_kind quantum-generator
//! seed 42
//! config n_layers 7
//! block theta 5,7,4 140
//! 1.5707963267948966e0 3.0e-1 ...
//! end
//! ```
//!
//! `config` lines are sorted by key. Each `block` line gives a name, the
//! comma-separated shape and the scalar count, and is followed by one line of
//! space-separated values in shortest round-trip decimal, so parsing recovers
//! every bit and re-encoding is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::dataio::{read_file, write_atomic};
use crate::error::{Error, Result};
use crate::generator::{GeneratorConfig, GeneratorParams};
use crate::models::{
    classical_generator_specs, decoder_specs, discriminator_specs, encoder_specs, Autoencoder, ClassicalGenerator,
    Discriminator, LatentGenerator,
};
use crate::nn::Sequential;

pub const MAGIC: &str = "LATENTQGAN-CHECKPOINT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Autoencoder,
    QuantumGenerator,
    ClassicalGenerator,
    Discriminator,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Autoencoder => "autoencoder",
            ModelKind::QuantumGenerator => "quantum-generator",
            ModelKind::ClassicalGenerator => "classical-generator",
            ModelKind::Discriminator => "discriminator",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ModelKind::Autoencoder,
            ModelKind::QuantumGenerator,
            ModelKind::ClassicalGenerator,
            ModelKind::Discriminator,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Format(format!("unknown model kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model_kind: ModelKind,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub blocks: Vec<ParamBlock>,
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

fn format_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("line {line}: {msg}"))
}

impl Checkpoint {
    pub fn new(model_kind: ModelKind, seed: u64) -> Self {
        Self {
            model_kind,
            seed,
            config: BTreeMap::new(),
            blocks: Vec::new(),
        }
    }

    pub fn with_config(mut self, key: &str, value: impl ToString) -> Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn scalar_count(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "format_version {FORMAT_VERSION}");
        let _ = writeln!(out, "model_kind {}", self.model_kind.name());
        let _ = writeln!(out, "seed {}", self.seed);
        for (k, v) in &self.config {
            if !is_token(k) || !is_token(v) {
                return Err(Error::Format(format!("config entry {k:?} = {v:?} is not a pair of tokens")));
            }
            let _ = writeln!(out, "config {k} {v}");
        }
        for b in &self.blocks {
            if !is_token(&b.name) {
                return Err(Error::Format(format!("block name {:?} is not a token", b.name)));
            }
            if b.shape.is_empty() || b.shape.iter().product::<usize>() != b.values.len() {
                return Err(Error::Format(format!(
                    "block {} has shape {:?} but {} values",
                    b.name,
                    b.shape,
                    b.values.len()
                )));
            }
            let dims: Vec<String> = b.shape.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "block {} {} {}", b.name, dims.join(","), b.values.len());
            let values: Vec<String> = b.values.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", values.join(" "));
        }
        out.push_str("end\n");
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(format!("checkpoint is not UTF-8: {e}")))?;
        Self::parse(text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Format(format!("missing {what}")));

        let (n, magic) = next("header")?;
        if magic != MAGIC {
            return Err(format_err(n, "not a checkpoint file"));
        }
        let (n, version) = next("format_version")?;
        let found = version
            .strip_prefix("format_version ")
            .ok_or_else(|| format_err(n, "expected format_version"))?;
        if found != FORMAT_VERSION.to_string() {
            return Err(Error::Version {
                expected: FORMAT_VERSION,
                found: found.to_string(),
            });
        }
        let (n, kind) = next("model_kind")?;
        let model_kind = kind
            .strip_prefix("model_kind ")
            .ok_or_else(|| format_err(n, "expected model_kind"))?
            .parse()?;
        let (n, seed) = next("seed")?;
        let seed = seed
            .strip_prefix("seed ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(n, "expected seed <u64>"))?;

        let mut ckpt = Checkpoint::new(model_kind, seed);
        loop {
            let (n, line) = next("end")?;
            let mut parts = line.split(' ');
            match parts.next() {
                Some("end") if line == "end" => break,
                Some("config") => {
                    let (Some(k), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(format_err(n, "expected config <key> <value>"));
                    };
                    if !is_token(k) || !is_token(v) {
                        return Err(format_err(n, "empty config token"));
                    }
                    if ckpt.config.insert(k.into(), v.into()).is_some() {
                        return Err(format_err(n, format!("duplicate config key {k}")));
                    }
                    if ckpt.config.keys().next_back().map(String::as_str) != Some(k) {
                        return Err(format_err(n, "config keys must be sorted"));
                    }
                    if !ckpt.blocks.is_empty() {
                        return Err(format_err(n, "config after block"));
                    }
                }
                Some("block") => {
                    let (Some(name), Some(dims), Some(count), None) =
                        (parts.next(), parts.next(), parts.next(), parts.next())
                    else {
                        return Err(format_err(n, "expected block <name> <shape> <count>"));
                    };
                    if !is_token(name) || ckpt.block(name).is_some() {
                        return Err(format_err(n, format!("bad or duplicate block name {name:?}")));
                    }
                    let shape: Vec<usize> = dims
                        .split(',')
                        .map(|d| d.parse().map_err(|_| format_err(n, format!("bad dimension {d:?}"))))
                        .collect::<Result<_>>()?;
                    let count: usize = count.parse().map_err(|_| format_err(n, format!("bad count {count:?}")))?;
                    let declared = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
                    if declared != Some(count) {
                        return Err(format_err(n, format!("shape {shape:?} does not hold {count} values")));
                    }
                    let (n, values_line) = next("block values")?;
                    let values: Vec<f64> = if values_line.is_empty() {
                        Vec::new()
                    } else {
                        values_line
                            .split(' ')
                            .map(|v| v.parse().map_err(|_| format_err(n, format!("bad value {v:?}"))))
                            .collect::<Result<_>>()?
                    };
                    if values.len() != count {
                        return Err(format_err(
                            n,
                            format!("block {name} declares {count} values, found {}", values.len()),
                        ));
                    }
                    ckpt.blocks.push(ParamBlock {
                        name: name.into(),
                        shape,
                        values,
                    });
                }
                _ => return Err(format_err(n, format!("unexpected line {line:?}"))),
            }
        }
        if let Some((n, _)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(format_err(n, "content after end"));
        }
        Ok(ckpt)
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.model_kind != kind {
            return Err(Error::Format(format!(
                "checkpoint holds a {}, expected a {}",
                self.model_kind.name(),
                kind.name()
            )));
        }
        Ok(())
    }

    fn config_value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.config
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format(format!("config {key} missing or malformed")))
    }

    fn push_sequential(&mut self, prefix: &str, net: &Sequential) {
        for (name, t) in net.named_params() {
            self.blocks.push(ParamBlock {
                name: format!("{prefix}.{name}"),
                shape: t.shape().to_vec(),
                values: t.data().to_vec(),
            });
        }
    }

    fn fill_sequential(&self, prefix: &str, net: &mut Sequential) -> Result<usize> {
        let names: Vec<String> = net.named_params().into_iter().map(|(n, _)| n).collect();
        for (name, t) in names.iter().zip(net.params_mut()) {
            let full = format!("{prefix}.{name}");
            let b = self
                .block(&full)
                .ok_or_else(|| Error::Format(format!("missing block {full}")))?;
            if b.shape != t.shape() {
                return Err(Error::Format(format!(
                    "block {full} has shape {:?}, model expects {:?}",
                    b.shape,
                    t.shape()
                )));
            }
            t.data_mut().copy_from_slice(&b.values);
        }
        Ok(names.len())
    }

    fn check_no_extra_blocks(&self, used: usize) -> Result<()> {
        if used != self.blocks.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} blocks, model uses {used}",
                self.blocks.len()
            )));
        }
        Ok(())
    }

    pub fn from_autoencoder(ae: &Autoencoder, seed: u64) -> Self {
        let mut c = Checkpoint::new(ModelKind::Autoencoder, seed);
        c.push_sequential("encoder", ae.encoder());
        c.push_sequential("decoder", ae.decoder());
        c
    }

    pub fn to_autoencoder(&self) -> Result<Autoencoder> {
        self.expect_kind(ModelKind::Autoencoder)?;
        let mut encoder = Sequential::zeroed(encoder_specs());
        let mut decoder = Sequential::zeroed(decoder_specs());
        let used = self.fill_sequential("encoder", &mut encoder)? + self.fill_sequential("decoder", &mut decoder)?;
        self.check_no_extra_blocks(used)?;
        Ok(Autoencoder::from_parts(encoder, decoder))
    }

    pub fn from_discriminator(d: &Discriminator, seed: u64) -> Self {
        let mut c = Checkpoint::new(ModelKind::Discriminator, seed);
        c.push_sequential("net", d.net());
        c
    }

    pub fn to_discriminator(&self) -> Result<Discriminator> {
        self.expect_kind(ModelKind::Discriminator)?;
        let mut net = Sequential::zeroed(discriminator_specs());
        let used = self.fill_sequential("net", &mut net)?;
        self.check_no_extra_blocks(used)?;
        Ok(Discriminator::from_net(net))
    }

    pub fn from_quantum(params: &GeneratorParams, seed: u64) -> Self {
        let cfg = params.config();
        let mut c = Checkpoint::new(ModelKind::QuantumGenerator, seed)
            .with_config("n_subgenerators", cfg.n_subgenerators)
            .with_config("n_data", cfg.n_data)
            .with_config("n_ancilla", cfg.n_ancilla)
            .with_config("n_layers", cfg.n_layers)
            .with_config("noise_high", format!("{:e}", cfg.noise_high));
        c.blocks.push(ParamBlock {
            name: "theta".into(),
            shape: vec![cfg.n_subgenerators, cfg.n_layers, cfg.n_qubits()],
            values: params.as_slice().to_vec(),
        });
        c
    }

    pub fn to_quantum(&self) -> Result<GeneratorParams> {
        self.expect_kind(ModelKind::QuantumGenerator)?;
        let config = GeneratorConfig {
            n_subgenerators: self.config_value("n_subgenerators")?,
            n_data: self.config_value("n_data")?,
            n_ancilla: self.config_value("n_ancilla")?,
            n_layers: self.config_value("n_layers")?,
            noise_high: self.config_value("noise_high")?,
        };
        config.validate().map_err(|e| Error::Format(format!("generator config: {e}")))?;
        let expected = vec![config.n_subgenerators, config.n_layers, config.n_qubits()];
        let b = self.block("theta").ok_or_else(|| Error::Format("missing block theta".into()))?;
        if b.shape != expected {
            return Err(Error::Format(format!(
                "block theta has shape {:?}, config implies {expected:?}",
                b.shape
            )));
        }
        self.check_no_extra_blocks(1)?;
        GeneratorParams::new(config, b.values.clone())
    }

    pub fn from_classical(g: &ClassicalGenerator, seed: u64) -> Self {
        let mut c = Checkpoint::new(ModelKind::ClassicalGenerator, seed);
        c.push_sequential("net", g.net());
        c
    }

    pub fn to_classical(&self) -> Result<ClassicalGenerator> {
        self.expect_kind(ModelKind::ClassicalGenerator)?;
        let mut net = Sequential::zeroed(classical_generator_specs());
        let used = self.fill_sequential("net", &mut net)?;
        self.check_no_extra_blocks(used)?;
        Ok(ClassicalGenerator::from_net(net))
    }

    /// Either generator kind behind the common training interface.
    pub fn to_generator(&self) -> Result<Box<dyn LatentGenerator + Send + Sync>> {
        match self.model_kind {
            ModelKind::QuantumGenerator => Ok(Box::new(self.to_quantum()?)),
            ModelKind::ClassicalGenerator => Ok(Box::new(self.to_classical()?)),
            other => Err(Error::Format(format!("checkpoint holds a {}, not a generator", other.name()))),
        }
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, ckpt.to_text()?.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&read_file(path)?)
}
