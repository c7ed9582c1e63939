//! The [[5,1,3]] five-qubit perfect code.
//!
//! Stabilizers are the cyclic set `XZZXI, IXZZX, XIXZZ, ZXIXZ`; logical Z is `ZZZZZ` and
//! logical X is `XXXXX`. Codewords are prepared by projecting a seed onto the joint +1
//! eigenspace, and the recovery table is derived from the anticommutation pattern of every
//! single-qubit Pauli.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{QkdError, Result};
use crate::patterns::{invert, Pattern};
use crate::quantum::{apply_permutation, qubit_mask, StateVec, DIM, NUM_QUBITS};

/// Measurement outcome probabilities below this are treated as impossible.
const UNDERFLOW: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of five single-qubit Paulis, position 0 acting on qubit 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString([Pauli; NUM_QUBITS]);

impl PauliString {
    pub const IDENTITY: PauliString = PauliString([Pauli::I; NUM_QUBITS]);

    pub fn new(factors: [Pauli; NUM_QUBITS]) -> Self {
        PauliString(factors)
    }

    /// Pauli `p` on `qubit` (1-based), identity elsewhere.
    pub fn single(qubit: usize, p: Pauli) -> Result<Self> {
        if !(1..=NUM_QUBITS).contains(&qubit) {
            return Err(QkdError::QubitOutOfRange(qubit));
        }
        let mut factors = [Pauli::I; NUM_QUBITS];
        factors[qubit - 1] = p;
        Ok(PauliString(factors))
    }

    pub fn factors(&self) -> [Pauli; NUM_QUBITS] {
        self.0
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let clashes =
            self.0.iter().zip(other.0.iter()).filter(|(a, b)| **a != Pauli::I && **b != Pauli::I && a != b).count();
        clashes % 2 == 0
    }

    /// Product `self · other` up to phase.
    pub fn times_ignoring_phase(&self, other: &PauliString) -> PauliString {
        let mut out = [Pauli::I; NUM_QUBITS];
        for (slot, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *slot = match (a, b) {
                (Pauli::I, p) | (p, Pauli::I) => *p,
                (x, y) if x == y => Pauli::I,
                (Pauli::X, Pauli::Y) | (Pauli::Y, Pauli::X) => Pauli::Z,
                (Pauli::Y, Pauli::Z) | (Pauli::Z, Pauli::Y) => Pauli::X,
                _ => Pauli::Y,
            };
        }
        PauliString(out)
    }

    fn masks(&self) -> (usize, usize, u32) {
        let (mut x, mut z, mut ys) = (0, 0, 0);
        for (i, p) in self.0.iter().enumerate() {
            let m = qubit_mask(i + 1);
            match p {
                Pauli::I => {}
                Pauli::X => x |= m,
                Pauli::Z => z |= m,
                Pauli::Y => {
                    x |= m;
                    z |= m;
                    ys += 1;
                }
            }
        }
        (x, z, ys)
    }

    /// Applies the operator to `state`; `Y = iXZ` on each factor.
    pub fn apply(&self, state: &StateVec) -> StateVec {
        StateVec::from_raw(self.apply_raw(state.amplitudes()))
    }

    fn apply_raw(&self, amps: &[Complex64; DIM]) -> [Complex64; DIM] {
        let (x, z, ys) = self.masks();
        let y_phase = Complex64::i().powu(ys);
        let mut out = [Complex64::new(0.0, 0.0); DIM];
        for (i, a) in amps.iter().enumerate() {
            let sign = if (i & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            out[i ^ x] = a * y_phase * sign;
        }
        out
    }

    /// `(I + (-1)^outcome · P) / 2` applied to `amps`, unnormalized.
    fn project_raw(&self, amps: &[Complex64; DIM], outcome: u8) -> [Complex64; DIM] {
        let image = self.apply_raw(amps);
        let sign = if outcome == 0 { 0.5 } else { -0.5 };
        let mut out = [Complex64::new(0.0, 0.0); DIM];
        for i in 0..DIM {
            out[i] = amps[i] * 0.5 + image[i] * sign;
        }
        out
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.0 {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = QkdError;

    fn from_str(s: &str) -> Result<Self> {
        let factors: Vec<Pauli> = s
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(QkdError::InvalidConfig(format!("bad Pauli letter {c:?} in {s:?}"))),
            })
            .collect::<Result<_>>()?;
        let factors: [Pauli; NUM_QUBITS] = factors
            .try_into()
            .map_err(|_| QkdError::InvalidConfig(format!("Pauli string {s:?} must have length 5")))?;
        Ok(PauliString(factors))
    }
}

use Pauli::{I, X, Z};

/// Stabilizer generators g1..g4.
pub const STABILIZERS: [PauliString; 4] = [
    PauliString([X, Z, Z, X, I]),
    PauliString([I, X, Z, Z, X]),
    PauliString([X, I, X, Z, Z]),
    PauliString([Z, X, I, X, Z]),
];
pub const LOGICAL_Z: PauliString = PauliString([Z; NUM_QUBITS]);
pub const LOGICAL_X: PauliString = PauliString([X; NUM_QUBITS]);

/// Computational (`Z`) or Hadamard (`X`) logical basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LogicalBasis {
    #[default]
    Z,
    X,
}

impl LogicalBasis {
    pub fn logical_operator(self) -> PauliString {
        match self {
            LogicalBasis::Z => LOGICAL_Z,
            LogicalBasis::X => LOGICAL_X,
        }
    }

    /// Whether a recovery Pauli flips a logical bit measured in this basis.
    pub fn flipped_by(self, op: &PauliString) -> bool {
        !op.commutes_with(&self.logical_operator())
    }
}

impl fmt::Display for LogicalBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogicalBasis::Z => "Z",
            LogicalBasis::X => "X",
        })
    }
}

impl FromStr for LogicalBasis {
    type Err = QkdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Z" | "z" => Ok(LogicalBasis::Z),
            "X" | "x" => Ok(LogicalBasis::X),
            other => Err(QkdError::InvalidConfig(format!("logical basis must be Z or X, got {other:?}"))),
        }
    }
}

/// Four syndrome bits, g1 most significant; bit set means eigenvalue −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Syndrome(u8);

impl Syndrome {
    pub const TRIVIAL: Syndrome = Syndrome(0);

    pub fn new(value: u8) -> Option<Self> {
        (value < 16).then_some(Syndrome(value))
    }

    pub fn value(&self) -> u8 {
        self.0
    }

    pub fn is_trivial(&self) -> bool {
        self.0 == 0
    }

    /// Outcome of generator `k` (0-based).
    pub fn bit(&self, k: usize) -> u8 {
        (self.0 >> (3 - k)) & 1
    }

    fn from_bits(bits: [u8; 4]) -> Self {
        Syndrome(bits.iter().fold(0, |acc, b| (acc << 1) | (b & 1)))
    }

    /// Syndrome an error operator would produce on a codeword.
    pub fn of_error(error: &PauliString) -> Self {
        Self::from_bits(STABILIZERS.map(|g| u8::from(!g.commutes_with(error))))
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04b}", self.0)
    }
}

/// Recovery operator for each of the 16 syndromes.
#[derive(Debug, Clone)]
pub struct CorrectionTable([PauliString; 16]);

impl CorrectionTable {
    fn build() -> Self {
        let mut table = [None; 16];
        table[0] = Some(PauliString::IDENTITY);
        for qubit in 1..=NUM_QUBITS {
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                let error = PauliString::single(qubit, p).expect("qubit in range");
                let s = Syndrome::of_error(&error);
                assert!(table[s.0 as usize].replace(error).is_none(), "syndrome {s} assigned twice");
            }
        }
        CorrectionTable(table.map(|e| e.expect("all 16 syndromes covered")))
    }

    pub fn get(&self, syndrome: Syndrome) -> PauliString {
        self.0[syndrome.0 as usize]
    }

    pub fn entries(&self) -> &[PauliString; 16] {
        &self.0
    }
}

pub fn correction_table() -> &'static CorrectionTable {
    static TABLE: OnceLock<CorrectionTable> = OnceLock::new();
    TABLE.get_or_init(CorrectionTable::build)
}

fn project_code_space(seed: StateVec) -> StateVec {
    let mut amps = *seed.amplitudes();
    for g in &STABILIZERS {
        amps = g.project_raw(&amps, 0);
    }
    StateVec::normalized(amps).expect("seed overlaps the code space")
}

fn codewords() -> &'static [StateVec; 2] {
    static WORDS: OnceLock<[StateVec; 2]> = OnceLock::new();
    WORDS.get_or_init(|| [project_code_space(StateVec::basis(0)), project_code_space(StateVec::basis(DIM - 1))])
}

/// `|0_L⟩` or `|1_L⟩` in the standard layout.
pub fn encode_logical(bit: u8) -> StateVec {
    codewords()[usize::from(bit & 1)].clone()
}

/// Logical basis state for `bit`; in the X basis bit 0 is `|+_L⟩` and bit 1 is `|−_L⟩`.
pub fn encode(bit: u8, basis: LogicalBasis) -> StateVec {
    match basis {
        LogicalBasis::Z => encode_logical(bit),
        LogicalBasis::X => {
            let [zero, one] = codewords();
            let sign = if bit & 1 == 0 { 1.0 } else { -1.0 };
            let mut amps = [Complex64::new(0.0, 0.0); DIM];
            for (i, slot) in amps.iter_mut().enumerate() {
                *slot = (zero.amplitude(i) + one.amplitude(i) * sign) * std::f64::consts::FRAC_1_SQRT_2;
            }
            StateVec::normalized(amps).expect("logical X eigenstate")
        }
    }
}

/// Probability of the +1 outcome when measuring `op`.
pub fn plus_probability(state: &StateVec, op: &PauliString) -> f64 {
    norm_sqr(&op.project_raw(state.amplitudes(), 0))
}

fn norm_sqr(amps: &[Complex64; DIM]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

/// A Born-sampled projective measurement of a Pauli observable.
#[derive(Debug, Clone)]
pub struct PauliMeasurement {
    /// 0 for eigenvalue +1, 1 for −1.
    pub outcome: u8,
    /// Probability of the outcome that occurred.
    pub probability: f64,
    pub post_state: StateVec,
}

pub fn measure_pauli<R: Rng + ?Sized>(state: &StateVec, op: &PauliString, rng: &mut R) -> Result<PauliMeasurement> {
    let plus = op.project_raw(state.amplitudes(), 0);
    let p0 = norm_sqr(&plus).clamp(0.0, 1.0);
    let outcome = u8::from(rng.random::<f64>() >= p0);
    let (probability, projected) =
        if outcome == 0 { (p0, plus) } else { (1.0 - p0, op.project_raw(state.amplitudes(), 1)) };
    if probability < UNDERFLOW {
        return Err(QkdError::ProjectionUnderflow(probability));
    }
    let post_state = StateVec::normalized(projected)?;
    Ok(PauliMeasurement { outcome, probability, post_state })
}

/// Syndrome extraction that also reports each generator outcome's probability.
pub fn extract_syndrome_traced<R: Rng + ?Sized>(
    state: &StateVec,
    rng: &mut R,
) -> Result<(Syndrome, StateVec, [f64; 4])> {
    let mut current = state.clone();
    let mut bits = [0u8; 4];
    let mut probabilities = [0.0; 4];
    for (k, g) in STABILIZERS.iter().enumerate() {
        let m = measure_pauli(&current, g, rng)?;
        bits[k] = m.outcome;
        probabilities[k] = m.probability;
        current = m.post_state;
    }
    Ok((Syndrome::from_bits(bits), current, probabilities))
}

/// Measures g1..g4 in order and returns the syndrome with the post-measurement state.
pub fn extract_syndrome<R: Rng + ?Sized>(state: &StateVec, rng: &mut R) -> Result<(Syndrome, StateVec)> {
    extract_syndrome_traced(state, rng).map(|(s, post, _)| (s, post))
}

/// Exact probability of each syndrome value.
pub fn syndrome_distribution(state: &StateVec) -> [f64; 16] {
    let mut out = [0.0; 16];
    for (value, slot) in out.iter_mut().enumerate() {
        let s = Syndrome(value as u8);
        let mut amps = *state.amplitudes();
        for (k, g) in STABILIZERS.iter().enumerate() {
            amps = g.project_raw(&amps, s.bit(k));
        }
        *slot = norm_sqr(&amps);
    }
    out
}

/// Applies the recovery operator for `syndrome`.
pub fn correct(state: &StateVec, syndrome: Syndrome) -> StateVec {
    correction_table().get(syndrome).apply(state)
}

/// Logical-Z measurement.
pub fn measure_logical<R: Rng + ?Sized>(state: &StateVec, rng: &mut R) -> Result<u8> {
    Ok(measure_pauli(state, &LOGICAL_Z, rng)?.outcome)
}

/// Outcome of a complete block decode.
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub bit: u8,
    pub syndrome: Syndrome,
    /// Probabilities of the four generator outcomes and the logical outcome, in order.
    pub outcome_probabilities: [f64; 5],
}

impl DecodeOutcome {
    /// True when every measurement in the decode had probability 0 or 1 within `tol`.
    pub fn is_deterministic(&self, tol: f64) -> bool {
        self.outcome_probabilities.iter().all(|&p| (p - 1.0).abs() <= tol)
    }
}

/// Undo `pattern`, extract the syndrome, recover, and measure the logical bit in `basis`.
pub fn decode_block_in<R: Rng + ?Sized>(
    state: &StateVec,
    pattern: &Pattern,
    basis: LogicalBasis,
    rng: &mut R,
) -> Result<DecodeOutcome> {
    let standard = apply_permutation(state, &invert(pattern));
    let (syndrome, post, syndrome_probs) = extract_syndrome_traced(&standard, rng)?;
    let recovered = correct(&post, syndrome);
    let logical = measure_pauli(&recovered, &basis.logical_operator(), rng)?;
    let mut outcome_probabilities = [0.0; 5];
    outcome_probabilities[..4].copy_from_slice(&syndrome_probs);
    outcome_probabilities[4] = logical.probability;
    Ok(DecodeOutcome { bit: logical.outcome, syndrome, outcome_probabilities })
}

/// Z-basis block decode returning `(bit, syndrome)`.
pub fn decode_block<R: Rng + ?Sized>(state: &StateVec, pattern: &Pattern, rng: &mut R) -> Result<(u8, Syndrome)> {
    decode_block_in(state, pattern, LogicalBasis::Z, rng).map(|o| (o.bit, o.syndrome))
}

/// Exact distribution of the bit [`decode_block_in`] returns, `[P(0), P(1)]`.
pub fn decode_bit_distribution(state: &StateVec, pattern: &Pattern, basis: LogicalBasis) -> [f64; 2] {
    let standard = apply_permutation(state, &invert(pattern));
    let logical = basis.logical_operator();
    let table = correction_table();
    let mut dist = [0.0; 2];
    for value in 0..16u8 {
        let s = Syndrome(value);
        let mut amps = *standard.amplitudes();
        for (k, g) in STABILIZERS.iter().enumerate() {
            amps = g.project_raw(&amps, s.bit(k));
        }
        let weight = norm_sqr(&amps);
        if weight < 1e-300 {
            continue;
        }
        let recovered = table.get(s).apply_raw(&amps);
        let p0 = norm_sqr(&logical.project_raw(&recovered, 0));
        dist[0] += p0;
        dist[1] += weight - p0;
    }
    dist
}
