//! Closed-form and exhaustive security quantities.
//!
//! Combinatorial probabilities are exact rationals over the 6540-set support; entropies and
//! photon statistics are floating point.

use num_complex::Complex64;
use num_rational::Ratio;
use rayon::prelude::*;

use crate::channel::EveKnowledge;
use crate::code5::{decode_bit_distribution, encode, LogicalBasis};
use crate::eigen::hermitian_eigenvalues;
use crate::error::{QkdError, Result};
use crate::patterns::{all_patterns, compose, invert, valid_pattern_sets, Pattern, PatternSet};
use crate::quantum::{
    apply_permutation, density_from_ensemble, entropy_of_spectrum, inner_product, von_neumann_entropy, DensityMatrix,
    StateVec,
};

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(QkdError::ProbabilityOutOfRange(p))
    }
}

/// `h(p)` in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability(p)?;
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

/// `1 − h(success)`: what a guess that is right with probability `success` tells Eve.
pub fn intercept_resend_mutual_info(success: f64) -> Result<f64> {
    Ok(1.0 - binary_entropy(success)?)
}

/// How many of the true patterns a uniformly drawn valid set contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GuessOutcomeDistribution {
    pub p_both: Ratio<u64>,
    pub p_one: Ratio<u64>,
    pub p_none: Ratio<u64>,
}

impl GuessOutcomeDistribution {
    pub fn as_f64(&self) -> [f64; 3] {
        [self.p_both, self.p_one, self.p_none].map(|r| *r.numer() as f64 / *r.denom() as f64)
    }
}

/// Exact overlap distribution between a uniformly random valid set and `secret`.
pub fn guess_outcome_distribution_for(secret: &PatternSet) -> GuessOutcomeDistribution {
    let mut counts = [0u64; 3];
    for s in valid_pattern_sets() {
        counts[s.shared_with(secret)] += 1;
    }
    let total = valid_pattern_sets().len() as u64;
    GuessOutcomeDistribution {
        p_both: Ratio::new(counts[2], total),
        p_one: Ratio::new(counts[1], total),
        p_none: Ratio::new(counts[0], total),
    }
}

/// [`guess_outcome_distribution_for`] against the first valid set; the result does not depend
/// on that choice.
pub fn guess_outcome_distribution() -> GuessOutcomeDistribution {
    guess_outcome_distribution_for(&valid_pattern_sets()[0])
}

/// `½ + k/8` for `k` correct patterns in Eve's set, assuming a wrong-pattern decode gives an
/// unbiased bit.
pub fn eve_success_probability(correct_patterns_in_guess: usize) -> Result<f64> {
    if correct_patterns_in_guess > 2 {
        return Err(QkdError::InvalidConfig(format!(
            "a guessed set holds at most 2 correct patterns, got {correct_patterns_in_guess}"
        )));
    }
    let match_probability = correct_patterns_in_guess as f64 / 4.0;
    Ok(match_probability + (1.0 - match_probability) * 0.5)
}

/// The two pattern states `π_p |0_L⟩` for `p` in the set.
pub fn pattern_states(set: &PatternSet) -> [StateVec; 2] {
    set.members().map(|p| apply_permutation(&encode(0, LogicalBasis::Z), &p))
}

/// Entropy terms of the ensemble where both bit values map to the same pattern-state mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaperHolevoTerms {
    pub chi: f64,
    pub entropy_mean: f64,
    pub entropy_rho0: f64,
    pub entropy_rho1: f64,
    /// `|⟨P0|P1⟩|`.
    pub pattern_overlap: f64,
}

/// `ρ₀ = ρ₁ = ½|P0⟩⟨P0| + ½|P1⟩⟨P1|`, so χ vanishes identically.
pub fn holevo_paper_terms(set: &PatternSet) -> Result<PaperHolevoTerms> {
    let [p0, p1] = pattern_states(set);
    let pattern_overlap = inner_product(&p0, &p1).norm();
    let rho0 = density_from_ensemble(&[(0.5, p0.clone()), (0.5, p1.clone())])?;
    let rho1 = density_from_ensemble(&[(0.5, p0), (0.5, p1)])?;
    let mean = DensityMatrix::mix(0.5, &rho0, 0.5, &rho1);
    let entropy_mean = von_neumann_entropy(&mean)?;
    let entropy_rho0 = von_neumann_entropy(&rho0)?;
    let entropy_rho1 = von_neumann_entropy(&rho1)?;
    Ok(PaperHolevoTerms {
        chi: entropy_mean - 0.5 * entropy_rho0 - 0.5 * entropy_rho1,
        entropy_mean,
        entropy_rho0,
        entropy_rho1,
        pattern_overlap,
    })
}

pub fn holevo_paper_model(set: &PatternSet) -> Result<f64> {
    holevo_paper_terms(set).map(|t| t.chi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolevoReport {
    pub chi_paper_model: f64,
    pub chi_physical_model: f64,
    pub entropy_mean: f64,
    pub entropy_rho0: f64,
    pub entropy_rho1: f64,
}

fn bit_conditioned_members(set: &PatternSet, bit: u8) -> Vec<(f64, StateVec)> {
    set.members().iter().map(|p| (0.5, apply_permutation(&encode(bit, LogicalBasis::Z), p))).collect()
}

/// `ρ_a = ½ Σ_p π_p|a_L⟩⟨a_L|π_p†` and the Holevo quantity of `{½ρ₀, ½ρ₁}`, via full 32×32
/// eigendecompositions.
pub fn holevo_physical_model(set: &PatternSet) -> Result<HolevoReport> {
    let rho0 = density_from_ensemble(&bit_conditioned_members(set, 0))?;
    let rho1 = density_from_ensemble(&bit_conditioned_members(set, 1))?;
    let mean = DensityMatrix::mix(0.5, &rho0, 0.5, &rho1);
    let entropy_mean = von_neumann_entropy(&mean)?;
    let entropy_rho0 = von_neumann_entropy(&rho0)?;
    let entropy_rho1 = von_neumann_entropy(&rho1)?;
    Ok(HolevoReport {
        chi_paper_model: holevo_paper_model(set)?,
        chi_physical_model: entropy_mean - 0.5 * entropy_rho0 - 0.5 * entropy_rho1,
        entropy_mean,
        entropy_rho0,
        entropy_rho1,
    })
}

/// Entropy of `Σ pᵢ|ψᵢ⟩⟨ψᵢ|` from the Gram matrix `Gᵢⱼ = √(pᵢpⱼ)⟨ψᵢ|ψⱼ⟩`, which shares the
/// nonzero spectrum of the density matrix.
pub fn gram_entropy(members: &[(f64, StateVec)]) -> Result<f64> {
    let n = members.len();
    let mut gram = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, (pi, a)) in members.iter().enumerate() {
        for (j, (pj, b)) in members.iter().enumerate() {
            gram[i * n + j] = inner_product(a, b) * (pi * pj).sqrt();
        }
    }
    Ok(entropy_of_spectrum(&hermitian_eigenvalues(n, &gram)?))
}

/// Physical-model χ through rank ≤ 4 Gram matrices.
pub fn holevo_physical_model_gram(set: &PatternSet) -> Result<f64> {
    let zero = bit_conditioned_members(set, 0);
    let one = bit_conditioned_members(set, 1);
    let mean: Vec<(f64, StateVec)> = zero.iter().chain(one.iter()).map(|(p, s)| (p * 0.5, s.clone())).collect();
    Ok(gram_entropy(&mean)? - 0.5 * gram_entropy(&zero)? - 0.5 * gram_entropy(&one)?)
}

/// One row of the exhaustive per-set χ table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetChi {
    pub set_id: usize,
    pub chi_physical_bits: f64,
    /// `|⟨π_a 0_L|π_b 0_L⟩|`
    pub overlap_00: f64,
    /// `|⟨π_a 0_L|π_b 1_L⟩|`
    pub overlap_01: f64,
}

pub fn set_chi(set_id: usize) -> Result<SetChi> {
    let set = PatternSet::from_id(set_id).ok_or_else(|| QkdError::InvalidConfig(format!("unknown set id {set_id}")))?;
    let [a, b] = set.members();
    let zero = encode(0, LogicalBasis::Z);
    let one = encode(1, LogicalBasis::Z);
    let a0 = apply_permutation(&zero, &a);
    Ok(SetChi {
        set_id,
        chi_physical_bits: holevo_physical_model(&set)?.chi_physical_model,
        overlap_00: inner_product(&a0, &apply_permutation(&zero, &b)).norm(),
        overlap_01: inner_product(&a0, &apply_permutation(&one, &b)).norm(),
    })
}

/// [`set_chi`] for every valid set, in set-id order.
pub fn chi_table() -> Result<Vec<SetChi>> {
    (0..valid_pattern_sets().len()).into_par_iter().map(set_chi).collect()
}

/// `μⁿ e^{−μ} / n!`.
pub fn poisson_pmf(n: u32, mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(QkdError::NegativeMean(mu));
    }
    if mu == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let log_factorial: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    Ok((n as f64 * mu.ln() - mu - log_factorial).exp())
}

/// `P(n ≥ 2) = 1 − e^{−μ}(1 + μ)`.
pub fn multiphoton_prob(mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(QkdError::NegativeMean(mu));
    }
    // -expm1(-mu) - mu e^{-mu} keeps precision for small mu
    Ok((-(-mu).exp_m1() - mu * (-mu).exp()).max(0.0))
}

/// Probability that at least 3 of a block's 5 pulses are multi-photon.
pub fn pns_block_leak_prob(mu: f64) -> Result<f64> {
    let q = multiphoton_prob(mu)?;
    let binom = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
    Ok((3..=5).map(|j| binom[j] * q.powi(j as i32) * (1.0 - q).powi(5 - j as i32)).sum())
}

/// Exact probability that decoding `π_relative |a_L⟩` in the standard layout returns `1 − a`.
pub fn wrong_decode_flip_probability(relative: &Pattern, basis: LogicalBasis, bit: u8) -> f64 {
    let state = apply_permutation(&encode(bit, basis), relative);
    decode_bit_distribution(&state, &Pattern::IDENTITY, basis)[usize::from(1 - (bit & 1))]
}

/// Exact noiseless-channel statistics of an intercept-resend session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptPrediction {
    /// `P(eve_bit = alice_bit)`.
    pub eve_success: f64,
    /// `P(bob_bit ≠ alice_bit)` on sifted blocks.
    pub mqer: f64,
    /// `P(eve_bit ≠ alice_bit | Eve's pattern ≠ Alice's)`; 0.5 means wrong decodes are unbiased.
    pub wrong_decode_error: Option<f64>,
}

/// Averages over Alice's bit and pattern, Eve's guess, and both decodes, with Bob using
/// Alice's pattern.
pub fn predict_intercept_resend(
    secret: &PatternSet,
    knowledge: &EveKnowledge,
    basis: LogicalBasis,
) -> InterceptPrediction {
    let guesses: Vec<Pattern> = match knowledge {
        EveKnowledge::Uniform => all_patterns().to_vec(),
        EveKnowledge::Guessed(s) => s.members().to_vec(),
    };
    let weight = 1.0 / (2.0 * 2.0 * guesses.len() as f64);
    let (mut success, mut mqer) = (0.0, 0.0);
    let (mut wrong_mass, mut wrong_err) = (0.0, 0.0);
    for alice in secret.members() {
        for guess in &guesses {
            for bit in 0..2u8 {
                // Eve sees pi_alice |a>, undoes pi_guess: relative permutation guess^-1 . alice
                let eve_flip = wrong_decode_flip_probability(&compose(&invert(guess), &alice), basis, bit);
                let eve_bits = [(bit, 1.0 - eve_flip), (1 - bit, eve_flip)];
                for (eve_bit, p_eve) in eve_bits {
                    let bob_flip = wrong_decode_flip_probability(&compose(&invert(&alice), guess), basis, eve_bit);
                    let p_bob_wrong = if eve_bit == bit { bob_flip } else { 1.0 - bob_flip };
                    mqer += weight * p_eve * p_bob_wrong;
                }
                success += weight * (1.0 - eve_flip);
                if *guess != alice {
                    wrong_mass += weight;
                    wrong_err += weight * eve_flip;
                }
            }
        }
    }
    InterceptPrediction {
        eve_success: success,
        mqer,
        wrong_decode_error: (wrong_mass > 0.0).then(|| wrong_err / wrong_mass),
    }
}
