//! Channel noise, fiber loss, weak-coherent-pulse photon statistics, and the
//! intercept-resend eavesdropper.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::code5::{decode_block_in, encode, LogicalBasis, Pauli, PauliString};
use crate::error::{QkdError, Result};
use crate::patterns::{sample_any_pattern, sample_pattern, Pattern, PatternSet, BLOCK_LEN};
use crate::quantum::{apply_permutation, StateVec};

/// Pulses in a block with two or more photons needed before a PNS split can leak anything.
pub const PNS_LEAK_PULSES: usize = 3;

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(QkdError::ProbabilityOutOfRange(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Per-qubit depolarizing probability; an errored qubit gets X, Y or Z uniformly.
    pub per_qubit_flip_prob: f64,
    pub distance_km: f64,
    pub loss_db_per_km: f64,
    /// Poisson mean photons per pulse; 0 models an ideal single-photon source.
    pub mean_photon_number: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { per_qubit_flip_prob: 0.0, distance_km: 0.0, loss_db_per_km: 0.2, mean_photon_number: 0.0 }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel { loss_db_per_km: 0.0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability(self.per_qubit_flip_prob)?;
        for (name, v) in [("distance_km", self.distance_km), ("loss_db_per_km", self.loss_db_per_km)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(QkdError::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.mean_photon_number.is_finite() && self.mean_photon_number >= 0.0) {
            return Err(QkdError::NegativeMean(self.mean_photon_number));
        }
        Ok(())
    }

    /// `10^(−distance·loss/10)`.
    pub fn photon_survival(&self) -> f64 {
        10f64.powf(-self.distance_km * self.loss_db_per_km / 10.0)
    }

    pub fn block_survival(&self) -> f64 {
        self.photon_survival().powi(BLOCK_LEN as i32)
    }
}

/// What an intercept-resend Eve draws her per-block pattern from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveKnowledge {
    /// Uniform over all 120 patterns.
    Uniform,
    /// Uniform over the two members of a guessed secret set.
    Guessed(PatternSet),
}

impl EveKnowledge {
    pub fn sample_guess<R: Rng + ?Sized>(&self, rng: &mut R) -> Pattern {
        match self {
            EveKnowledge::Uniform => sample_any_pattern(rng),
            EveKnowledge::Guessed(set) => sample_pattern(set, rng).1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EveStrategy {
    #[default]
    None,
    InterceptResend(EveKnowledge),
}

impl fmt::Display for EveStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EveStrategy::None => f.write_str("none"),
            EveStrategy::InterceptResend(EveKnowledge::Uniform) => f.write_str("intercept_resend uniform"),
            EveStrategy::InterceptResend(EveKnowledge::Guessed(s)) => write!(f, "intercept_resend {s}"),
        }
    }
}

impl FromStr for EveKnowledge {
    type Err = QkdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(EveKnowledge::Uniform),
            other => other.parse().map(EveKnowledge::Guessed),
        }
    }
}

/// Eve's view of one block she intercepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EveRecord {
    pub guessed_pattern: Pattern,
    pub eve_bit: u8,
    pub acted: bool,
}

/// I.i.d. depolarizing channel; returns the new state and how many qubits were hit.
pub fn apply_depolarizing<R: Rng + ?Sized>(state: &StateVec, p: f64, rng: &mut R) -> Result<(StateVec, usize)> {
    check_probability(p)?;
    let mut factors = [Pauli::I; BLOCK_LEN];
    for slot in factors.iter_mut() {
        if rng.random_bool(p) {
            *slot = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
        }
    }
    let error = PauliString::new(factors);
    let weight = error.weight();
    let out = if weight == 0 { state.clone() } else { error.apply(state) };
    Ok((out, weight))
}

/// True when the block is lost; it survives only if all five photons do.
pub fn sample_block_loss<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> bool {
    let survival = model.photon_survival().clamp(0.0, 1.0);
    let mut survived = true;
    for _ in 0..BLOCK_LEN {
        survived &= rng.random_bool(survival);
    }
    !survived
}

/// Photon count of each of the five pulses, Poisson with mean `mu`.
pub fn sample_photon_numbers<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Result<[u32; BLOCK_LEN]> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(QkdError::NegativeMean(mu));
    }
    if mu == 0.0 {
        return Ok([0; BLOCK_LEN]);
    }
    let poisson = Poisson::new(mu).map_err(|_| QkdError::NegativeMean(mu))?;
    let mut counts = [0u32; BLOCK_LEN];
    for c in counts.iter_mut() {
        *c = poisson.sample(rng) as u32;
    }
    Ok(counts)
}

/// A block leaks under photon-number splitting when at least three of its pulses are multi-photon.
pub fn is_pns_leak(counts: &[u32; BLOCK_LEN]) -> bool {
    counts.iter().filter(|&&n| n >= 2).count() >= PNS_LEAK_PULSES
}

/// Runs Eve on an in-flight block: decode with her guessed pattern, then resend her result
/// encoded under that same pattern.
pub fn eve_apply<R: Rng + ?Sized>(
    strategy: &EveStrategy,
    state: &StateVec,
    basis: LogicalBasis,
    rng: &mut R,
) -> Result<(StateVec, Option<EveRecord>)> {
    let knowledge = match strategy {
        EveStrategy::None => return Ok((state.clone(), None)),
        EveStrategy::InterceptResend(k) => k,
    };
    let guessed_pattern = knowledge.sample_guess(rng);
    let decoded = decode_block_in(state, &guessed_pattern, basis, rng)?;
    let resent = apply_permutation(&encode(decoded.bit, basis), &guessed_pattern);
    Ok((resent, Some(EveRecord { guessed_pattern, eve_bit: decoded.bit, acted: true })))
}
