//! Dense statevector simulation for small registers.
//!
//! Basis-index convention: qubit 0 is the most-significant bit of the basis
//! index, so an `n`-qubit index `i` carries qubit `q` in bit `n - 1 - q`.
//! Ancilla qubits are the trailing wires, which puts them in the
//! least-significant bits; the indices whose ancilla bits are all zero are
//! exactly `{ j << n_ancilla }`.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest register this simulator accepts.
pub const MAX_QUBITS: usize = 20;

/// Tolerance used when validating externally supplied probability vectors.
const PROB_SUM_TOL: f64 = 1e-9;

/// Post-selection fails when the surviving mass is below this.
pub const POST_SELECT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n_qubits` wires.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Size(format!(
                "register of {n_qubits} qubits is outside 1..={MAX_QUBITS}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two and the norm one.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Size(format!(
                "{len} amplitudes is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Size(format!("{n_qubits} qubits exceeds {MAX_QUBITS}")));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Domain(format!("state norm {norm} is not 1")));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn bit_of(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::Index(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Applies `RY(angle) = [[cos(a/2), -sin(a/2)], [sin(a/2), cos(a/2)]]` to `qubit`.
    pub fn apply_ry(mut self, qubit: usize, angle: f64) -> Result<Self> {
        self.ry_in_place(qubit, angle)?;
        Ok(self)
    }

    pub(crate) fn ry_in_place(&mut self, qubit: usize, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        let (s, c) = (angle / 2.0).sin_cos();
        let bit = self.bit_of(qubit);
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | bit];
                self.amps[i] = a0 * c - a1 * s;
                self.amps[i | bit] = a0 * s + a1 * c;
            }
        }
        Ok(())
    }

    /// Negates every amplitude whose `control` and `target` bits are both set.
    pub fn apply_cz(mut self, control: usize, target: usize) -> Result<Self> {
        self.cz_in_place(control, target)?;
        Ok(self)
    }

    pub(crate) fn cz_in_place(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Index(format!(
                "CZ control and target are both qubit {control}"
            )));
        }
        let mask = self.bit_of(control) | self.bit_of(target);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    /// Born probabilities over the full computational basis.
    pub fn probabilities(&self) -> ProbabilityVector {
        ProbabilityVector {
            probs: self.amps.iter().map(|a| a.norm_sqr()).collect(),
        }
    }
}

/// `|0...0>` on `n_qubits` wires.
pub fn init_zero_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::zero(n_qubits)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    /// Validates non-negativity and unit sum (to 1e-9).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Size("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Domain(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Domain(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Keeps the outcomes whose `n_ancilla` low bits are zero and renormalizes.
pub fn post_select(full: &ProbabilityVector, n_ancilla: usize) -> Result<ProbabilityVector> {
    post_select_slice(full.as_slice(), n_ancilla).map(|probs| ProbabilityVector { probs })
}

pub(crate) fn post_select_slice(full: &[f64], n_ancilla: usize) -> Result<Vec<f64>> {
    let len = full.len();
    if !len.is_power_of_two() || len >> n_ancilla < 2 {
        return Err(Error::Size(format!(
            "cannot post-select {n_ancilla} ancilla from {len} outcomes"
        )));
    }
    let kept: Vec<f64> = full.iter().step_by(1 << n_ancilla).copied().collect();
    let mass: f64 = kept.iter().sum();
    if mass.is_nan() || mass < POST_SELECT_FLOOR {
        return Err(Error::PostSelectionImpossible(mass));
    }
    Ok(kept.into_iter().map(|p| p / mass).collect())
}

/// Draws `shots` outcomes and returns the empirical frequencies.
pub fn sample_counts(probs: &ProbabilityVector, shots: u64, seed: u64) -> Result<ProbabilityVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_frequencies(probs, shots, &mut rng)
}

pub fn sample_frequencies<R: Rng + ?Sized>(
    probs: &ProbabilityVector,
    shots: u64,
    rng: &mut R,
) -> Result<ProbabilityVector> {
    let counts = sample_histogram(probs, shots, rng)?;
    let total = shots as f64;
    Ok(ProbabilityVector {
        probs: counts.into_iter().map(|c| c as f64 / total).collect(),
    })
}

/// Multinomial histogram of `shots` draws.
pub fn sample_histogram<R: Rng + ?Sized>(
    probs: &ProbabilityVector,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::Size("shot count must be at least 1".into()));
    }
    let dist = WeightedIndex::new(probs.as_slice())
        .map_err(|e| Error::Domain(format!("cannot sample from distribution: {e}")))?;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        counts[dist.sample(rng)] += 1;
    }
    Ok(counts)
}
