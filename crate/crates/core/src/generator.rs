//! Patch quantum generator.
//!
//! `T` independent circuits each produce one row of a [`LatentMatrix`]. A
//! circuit encodes the noise with an untrained `RY(alpha_i)` layer, then runs
//! `L` trainable layers of `RY(theta)` on every qubit followed by the
//! non-wrapping CZ chain `CZ(0,1) CZ(1,2) ...`. The trailing `N_A` qubits are
//! ancilla: the row is the data-register distribution conditioned on the
//! ancilla reading all zeros.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::latent::LatentMatrix;
use crate::qsim::{self, ProbabilityVector, StateVector};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    /// Sub-generator count `T`, one per latent row.
    pub n_subgenerators: usize,
    /// Data qubits `N_G`; each row has `2^N_G` entries.
    pub n_data: usize,
    /// Ancilla qubits `N_A`.
    pub n_ancilla: usize,
    /// Trainable layers `L`.
    pub n_layers: usize,
    /// Noise angles are drawn from `[0, noise_high)`.
    pub noise_high: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_subgenerators: 5,
            n_data: 3,
            n_ancilla: 1,
            n_layers: 7,
            noise_high: PI,
        }
    }
}

impl GeneratorConfig {
    pub fn new(n_subgenerators: usize, n_data: usize, n_ancilla: usize, n_layers: usize) -> Result<Self> {
        let config = Self {
            n_subgenerators,
            n_data,
            n_ancilla,
            n_layers,
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subgenerators == 0 || self.n_data == 0 || self.n_layers == 0 {
            return Err(Error::Size(format!(
                "generator counts must be positive (T={}, N_G={}, L={})",
                self.n_subgenerators, self.n_data, self.n_layers
            )));
        }
        if self.n_qubits() > qsim::MAX_QUBITS {
            return Err(Error::Size(format!("{} qubits exceeds {}", self.n_qubits(), qsim::MAX_QUBITS)));
        }
        if !(self.noise_high.is_finite() && self.noise_high > 0.0) {
            return Err(Error::Domain(format!("noise range [0, {}) is empty", self.noise_high)));
        }
        Ok(())
    }

    /// `N = N_G + N_A`.
    pub fn n_qubits(&self) -> usize {
        self.n_data + self.n_ancilla
    }

    /// Entries per latent row, `2^N_G`.
    pub fn row_len(&self) -> usize {
        1 << self.n_data
    }

    /// Angles per sub-generator, `L * N`.
    pub fn params_per_subgenerator(&self) -> usize {
        self.n_layers * self.n_qubits()
    }

    /// `T * L * N`.
    pub fn param_count(&self) -> usize {
        self.n_subgenerators * self.params_per_subgenerator()
    }
}

/// Rotation angles laid out `[t][layer][qubit]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    config: GeneratorConfig,
    theta: Vec<f64>,
}

impl GeneratorParams {
    pub fn new(config: GeneratorConfig, theta: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if theta.len() != config.param_count() {
            return Err(Error::Shape(format!(
                "expected {} generator angles, got {}",
                config.param_count(),
                theta.len()
            )));
        }
        Ok(Self { config, theta })
    }

    pub fn zeros(config: GeneratorConfig) -> Result<Self> {
        let n = config.param_count();
        Self::new(config, vec![0.0; n])
    }

    /// Angles drawn i.i.d. from `[0, pi)`.
    pub fn random<R: Rng + ?Sized>(config: GeneratorConfig, rng: &mut R) -> Result<Self> {
        let theta = (0..config.param_count()).map(|_| rng.random_range(0.0..PI)).collect();
        Self::new(config, theta)
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// The `L * N` angles of sub-generator `t`.
    pub fn subgenerator(&self, t: usize) -> &[f64] {
        let n = self.config.params_per_subgenerator();
        &self.theta[t * n..(t + 1) * n]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseVector(Vec<f64>);

impl NoiseVector {
    pub fn new(alpha: Vec<f64>) -> Self {
        Self(alpha)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Forward-pass evaluation strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Exact Born probabilities.
    Analytic,
    /// Post-selected empirical frequencies from `shots` circuit runs.
    Shots(u64),
}

/// One noise vector, deterministic per seed.
pub fn sample_noise(config: &GeneratorConfig, seed: u64) -> NoiseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_noise_with(config, &mut rng)
}

pub fn sample_noise_with<R: Rng + ?Sized>(config: &GeneratorConfig, rng: &mut R) -> NoiseVector {
    NoiseVector(
        (0..config.n_qubits())
            .map(|_| rng.random_range(0.0..config.noise_high))
            .collect(),
    )
}

fn check_inputs(theta_t: &[f64], z: &NoiseVector, config: &GeneratorConfig) -> Result<()> {
    if theta_t.len() != config.params_per_subgenerator() {
        return Err(Error::Shape(format!(
            "sub-generator needs {} angles, got {}",
            config.params_per_subgenerator(),
            theta_t.len()
        )));
    }
    if z.0.len() != config.n_qubits() {
        return Err(Error::Shape(format!(
            "noise vector needs {} angles, got {}",
            config.n_qubits(),
            z.0.len()
        )));
    }
    Ok(())
}

/// Output state `prod_l U_l |z>` of one sub-generator.
pub fn subgenerator_state(theta_t: &[f64], z: &NoiseVector, config: &GeneratorConfig) -> Result<StateVector> {
    check_inputs(theta_t, z, config)?;
    let n = config.n_qubits();
    let mut state = StateVector::zero(n)?;
    for (q, &alpha) in z.0.iter().enumerate() {
        state.ry_in_place(q, alpha)?;
    }
    for layer in theta_t.chunks(n) {
        for (q, &angle) in layer.iter().enumerate() {
            state.ry_in_place(q, angle)?;
        }
        for q in 0..n - 1 {
            state.cz_in_place(q, q + 1)?;
        }
    }
    Ok(state)
}

fn joint_probabilities(theta_t: &[f64], z: &NoiseVector, config: &GeneratorConfig) -> Result<ProbabilityVector> {
    Ok(subgenerator_state(theta_t, z, config)?.probabilities())
}

/// Post-selected data-register distribution `G_t(z)`, length `2^N_G`.
pub fn run_subgenerator(theta_t: &[f64], z: &NoiseVector, config: &GeneratorConfig) -> Result<Vec<f64>> {
    let full = joint_probabilities(theta_t, z, config)?;
    Ok(qsim::post_select(&full, config.n_ancilla)?.into_vec())
}

/// Like [`run_subgenerator`] but estimated from `shots` sampled bitstrings,
/// keeping only those whose ancilla bits read zero.
pub fn run_subgenerator_shots<R: Rng + ?Sized>(
    theta_t: &[f64],
    z: &NoiseVector,
    config: &GeneratorConfig,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let full = joint_probabilities(theta_t, z, config)?;
    let freqs = qsim::sample_frequencies(&full, shots, rng)?;
    Ok(qsim::post_select(&freqs, config.n_ancilla)?.into_vec())
}

/// Stacks the `T` sub-generator rows; every circuit sees the same `z`.
pub fn run_generator(params: &GeneratorParams, z: &NoiseVector) -> Result<LatentMatrix> {
    let config = &params.config;
    let rows: Vec<Vec<f64>> = (0..config.n_subgenerators)
        .into_par_iter()
        .map(|t| {
            run_subgenerator(params.subgenerator(t), z, config).map_err(|e| Error::SubGenerator {
                row: t,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(LatentMatrix::from_rows_unchecked(
        config.n_subgenerators,
        config.row_len(),
        rows.concat(),
    ))
}

/// Forward pass in either mode. Shot mode draws one independent RNG stream per row from `seed`.
pub fn run_generator_mode(params: &GeneratorParams, z: &NoiseVector, mode: EvalMode, seed: u64) -> Result<LatentMatrix> {
    let EvalMode::Shots(shots) = mode else {
        return run_generator(params, z);
    };
    let config = &params.config;
    let mut data = Vec::with_capacity(config.n_subgenerators * config.row_len());
    for t in 0..config.n_subgenerators {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let row = run_subgenerator_shots(params.subgenerator(t), z, config, shots, &mut rng).map_err(|e| {
            Error::SubGenerator {
                row: t,
                source: Box::new(e),
            }
        })?;
        data.extend(row);
    }
    Ok(LatentMatrix::from_rows_unchecked(config.n_subgenerators, config.row_len(), data))
}

/// Parameter-shift derivatives of the kept (ancilla-zero) joint probabilities.
///
/// Entry `[k][j]` is `d p_{j << N_A} / d theta_k`, computed as
/// `(p(theta_k + pi/2) - p(theta_k - pi/2)) / 2`.
pub fn kept_probability_jacobian(theta_t: &[f64], z: &NoiseVector, config: &GeneratorConfig) -> Result<Vec<Vec<f64>>> {
    check_inputs(theta_t, z, config)?;
    let stride = 1 << config.n_ancilla;
    (0..theta_t.len())
        .into_par_iter()
        .map(|k| {
            let mut shifted = theta_t.to_vec();
            shifted[k] = theta_t[k] + FRAC_PI_2;
            let plus = joint_probabilities(&shifted, z, config)?;
            shifted[k] = theta_t[k] - FRAC_PI_2;
            let minus = joint_probabilities(&shifted, z, config)?;
            Ok(plus
                .as_slice()
                .iter()
                .zip(minus.as_slice())
                .step_by(stride)
                .map(|(p, m)| 0.5 * (p - m))
                .collect())
        })
        .collect()
}

/// Vector-Jacobian product of one sub-generator row with `upstream`.
///
/// With `S = sum_j p_j` over kept outcomes and `G_j = p_j / S`,
/// `dL/dtheta = (sum_j g_j dp_j - (sum_j g_j G_j) sum_j dp_j) / S`.
pub fn subgenerator_gradient(
    theta_t: &[f64],
    z: &NoiseVector,
    config: &GeneratorConfig,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    if upstream.len() != config.row_len() {
        return Err(Error::Shape(format!(
            "upstream row needs {} entries, got {}",
            config.row_len(),
            upstream.len()
        )));
    }
    let full = joint_probabilities(theta_t, z, config)?;
    let kept: Vec<f64> = full.as_slice().iter().step_by(1 << config.n_ancilla).copied().collect();
    let mass: f64 = kept.iter().sum();
    if mass.is_nan() || mass < qsim::POST_SELECT_FLOOR {
        return Err(Error::PostSelectionImpossible(mass));
    }
    let weighted_output: f64 = upstream.iter().zip(&kept).map(|(g, p)| g * p / mass).sum();
    let jacobian = kept_probability_jacobian(theta_t, z, config)?;
    Ok(jacobian
        .iter()
        .map(|dp| {
            let direct: f64 = upstream.iter().zip(dp).map(|(g, d)| g * d).sum();
            let dmass: f64 = dp.iter().sum();
            (direct - weighted_output * dmass) / mass
        })
        .collect())
}

/// Gradient of `sum_{t,j} upstream[t][j] * G_t(z)_j` w.r.t. every angle.
///
/// Each sub-generator's angles receive contributions from its own row only.
/// Analytic mode only.
pub fn generator_gradient(
    params: &GeneratorParams,
    z: &NoiseVector,
    upstream: &[f64],
    mode: EvalMode,
) -> Result<Vec<f64>> {
    if let EvalMode::Shots(_) = mode {
        return Err(Error::UnsupportedMode(
            "generator gradients require analytic simulation".into(),
        ));
    }
    let config = &params.config;
    let row_len = config.row_len();
    if upstream.len() != config.n_subgenerators * row_len {
        return Err(Error::Shape(format!(
            "upstream gradient needs {} entries, got {}",
            config.n_subgenerators * row_len,
            upstream.len()
        )));
    }
    let per_row: Vec<Vec<f64>> = (0..config.n_subgenerators)
        .into_par_iter()
        .map(|t| {
            let g = &upstream[t * row_len..(t + 1) * row_len];
            if g.iter().all(|v| *v == 0.0) {
                return Ok(vec![0.0; config.params_per_subgenerator()]);
            }
            subgenerator_gradient(params.subgenerator(t), z, config, g).map_err(|e| Error::SubGenerator {
                row: t,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(per_row.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> GeneratorConfig {
        GeneratorConfig::new(2, 2, 1, 2).unwrap()
    }

    #[test]
    fn default_counts() {
        let config = GeneratorConfig::default();
        assert_eq!(config.n_qubits(), 4);
        assert_eq!(config.row_len(), 8);
        assert_eq!(config.param_count(), 140);
        let params = GeneratorParams::zeros(config).unwrap();
        assert_eq!(params.len(), 140);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(GeneratorConfig::new(0, 3, 1, 7), Err(Error::Size(_))));
        assert!(matches!(GeneratorConfig::new(5, 3, 1, 0), Err(Error::Size(_))));
        assert!(GeneratorConfig::new(5, 3, 0, 7).is_ok());
        let config = GeneratorConfig::default();
        assert!(matches!(GeneratorParams::new(config.clone(), vec![0.0; 139]), Err(Error::Shape(_))));
        let z = NoiseVector::new(vec![0.0; 3]);
        assert!(matches!(run_subgenerator(&[0.0; 28], &z, &config), Err(Error::Shape(_))));
    }

    #[test]
    fn noise_is_seeded_and_in_range() {
        let config = GeneratorConfig::default();
        assert_eq!(sample_noise(&config, 5), sample_noise(&config, 5));
        assert_ne!(sample_noise(&config, 5), sample_noise(&config, 6));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draws = 100_000;
        let mut sums = vec![0.0; config.n_qubits()];
        for _ in 0..draws {
            let z = sample_noise_with(&config, &mut rng);
            for (s, a) in sums.iter_mut().zip(z.as_slice()) {
                assert!((0.0..PI).contains(a));
                *s += a;
            }
        }
        for s in sums {
            assert!((s / draws as f64 - PI / 2.0).abs() < 0.02);
        }
    }

    #[test]
    fn zero_angles_give_basis_state_zero() {
        let config = GeneratorConfig::default();
        let z = NoiseVector::new(vec![0.0; 4]);
        let row = run_subgenerator(&[0.0; 28], &z, &config).unwrap();
        assert_eq!(row, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn default_config_output_is_5x8_row_stochastic() {
        let config = GeneratorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = GeneratorParams::random(config.clone(), &mut rng).unwrap();
        let z = sample_noise_with(&config, &mut rng);
        let latent = run_generator(&params, &z).unwrap();
        assert_eq!((latent.rows(), latent.cols()), (5, 8));
        assert_eq!(latent.as_slice().len(), 40);
        for t in 0..5 {
            assert!((latent.row(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(latent.row(t).iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn permuting_subgenerators_permutes_rows() {
        let config = GeneratorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = GeneratorParams::random(config.clone(), &mut rng).unwrap();
        let z = sample_noise_with(&config, &mut rng);
        let order = [3, 0, 4, 1, 2];
        let permuted: Vec<f64> = order.iter().flat_map(|&t| params.subgenerator(t).to_vec()).collect();
        let permuted = GeneratorParams::new(config, permuted).unwrap();
        let a = run_generator(&params, &z).unwrap();
        let b = run_generator(&permuted, &z).unwrap();
        for (i, &t) in order.iter().enumerate() {
            assert_eq!(b.row(i), a.row(t));
        }
    }

    #[test]
    fn perturbing_one_subgenerator_changes_only_its_row() {
        let config = GeneratorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let params = GeneratorParams::random(config.clone(), &mut rng).unwrap();
        let z = sample_noise_with(&config, &mut rng);
        let base = run_generator(&params, &z).unwrap();
        for t in 0..5 {
            let mut p = params.clone();
            p.as_mut_slice()[t * 28 + 11] += 0.3;
            let out = run_generator(&p, &z).unwrap();
            for r in 0..5 {
                if r == t {
                    assert_ne!(out.row(r), base.row(r));
                } else {
                    assert_eq!(out.row(r), base.row(r));
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let config = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = GeneratorParams::random(config.clone(), &mut rng).unwrap();
        let z = sample_noise_with(&config, &mut rng);
        let g = generator_gradient(&params, &z, &[0.0; 8], EvalMode::Analytic).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn row_sum_has_zero_gradient() {
        let config = GeneratorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let params = GeneratorParams::random(config.clone(), &mut rng).unwrap();
        let z = sample_noise_with(&config, &mut rng);
        let g = generator_gradient(&params, &z, &vec![1.0; 40], EvalMode::Analytic).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
    }

    #[test]
    fn shot_mode_gradient_is_rejected() {
        let config = small_config();
        let params = GeneratorParams::zeros(config.clone()).unwrap();
        let z = NoiseVector::new(vec![0.0; 3]);
        assert!(matches!(
            generator_gradient(&params, &z, &[1.0; 8], EvalMode::Shots(2048)),
            Err(Error::UnsupportedMode(_))
        ));
    }

    #[test]
    fn shot_mode_rows_are_normalized() {
        let config = GeneratorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params = GeneratorParams::random(config.clone(), &mut rng).unwrap();
        let z = sample_noise_with(&config, &mut rng);
        let a = run_generator_mode(&params, &z, EvalMode::Shots(2048), 4).unwrap();
        let b = run_generator_mode(&params, &z, EvalMode::Shots(2048), 4).unwrap();
        assert_eq!(a, b);
        for t in 0..5 {
            assert!((a.row(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn post_selection_failure_names_the_row() {
        // The noise layer flips the ancilla to |1>; only row 0 rotates it back.
        let config = GeneratorConfig::new(2, 1, 1, 1).unwrap();
        let z = NoiseVector::new(vec![0.0, PI]);
        let params = GeneratorParams::new(config, vec![0.0, PI, 0.0, 0.0]).unwrap();
        let err = run_generator(&params, &z).unwrap_err();
        let Error::SubGenerator { row, source } = err else {
            panic!("unexpected error {err}");
        };
        assert_eq!(row, 1);
        assert!(matches!(*source, Error::PostSelectionImpossible(_)));
    }
}
