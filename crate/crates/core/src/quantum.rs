//! Exact five-qubit statevector and 32×32 density-matrix arithmetic.
//!
//! Qubit 1 is the most significant bit of the amplitude index, qubit 5 the least.
//! All operations take states by reference and return new values.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::eigen;
use crate::error::{QkdError, Result};
use crate::patterns::{Pattern, BLOCK_LEN};

pub const NUM_QUBITS: usize = BLOCK_LEN;
pub const DIM: usize = 1 << NUM_QUBITS;

const NORM_TOLERANCE: f64 = 1e-10;
const UNITARY_TOLERANCE: f64 = 1e-10;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Bit mask of `qubit` (1-based) inside an amplitude index.
pub fn qubit_mask(qubit: usize) -> usize {
    1 << (NUM_QUBITS - qubit)
}

fn check_qubit(qubit: usize) -> Result<()> {
    if (1..=NUM_QUBITS).contains(&qubit) {
        Ok(())
    } else {
        Err(QkdError::QubitOutOfRange(qubit))
    }
}

/// Normalized pure state of five qubits.
#[derive(Clone, PartialEq)]
pub struct StateVec {
    amps: [Complex64; DIM],
}

impl StateVec {
    /// Computational basis state `|index⟩`.
    pub fn basis(index: usize) -> Self {
        assert!(index < DIM, "basis index {index} out of range");
        let mut amps = [ZERO; DIM];
        amps[index] = ONE;
        StateVec { amps }
    }

    pub fn zero() -> Self {
        Self::basis(0)
    }

    /// Basis state from five bits, `bits[0]` being qubit 1.
    pub fn from_bits(bits: [u8; NUM_QUBITS]) -> Self {
        let index = bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | (usize::from(b & 1) * qubit_mask(i + 1)));
        Self::basis(index)
    }

    pub fn from_amplitudes(amps: [Complex64; DIM]) -> Result<Self> {
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QkdError::NonFinite);
        }
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(QkdError::NotNormalized(norm_sqr));
        }
        Ok(StateVec { amps })
    }

    /// Rescales an arbitrary nonzero vector to unit norm.
    pub fn normalized(amps: [Complex64; DIM]) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(QkdError::NotNormalized(norm * norm));
        }
        Self::from_amplitudes(amps.map(|a| a / norm))
    }

    pub(crate) fn from_raw(amps: [Complex64; DIM]) -> Self {
        StateVec { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64; DIM] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability that measuring `qubit` yields 1.
    pub fn probability_one(&self, qubit: usize) -> Result<f64> {
        check_qubit(qubit)?;
        let mask = qubit_mask(qubit);
        Ok(self.amps.iter().enumerate().filter(|(i, _)| i & mask != 0).map(|(_, a)| a.norm_sqr()).sum())
    }

    /// Largest elementwise difference, for tests and diagnostics.
    pub fn max_abs_diff(&self, other: &StateVec) -> f64 {
        self.amps.iter().zip(other.amps.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `|⟨self|other⟩|`, the global-phase-insensitive overlap.
    pub fn fidelity_amplitude(&self, other: &StateVec) -> f64 {
        inner_product(self, other).norm()
    }
}

impl fmt::Debug for StateVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_map();
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() > 1e-24 {
                list.entry(&format_args!("|{i:05b}⟩"), a);
            }
        }
        list.finish()
    }
}

/// `⟨a|b⟩`.
pub fn inner_product(a: &StateVec, b: &StateVec) -> Complex64 {
    a.amps.iter().zip(b.amps.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn max_unitary_deviation<const N: usize>(m: &[[Complex64; N]; N]) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..N {
        for j in 0..N {
            let dot: Complex64 = (0..N).map(|k| m[k][i].conj() * m[k][j]).sum();
            let target = if i == j { ONE } else { ZERO };
            dev = dev.max((dot - target).norm());
        }
    }
    dev
}

fn adjoint<const N: usize>(m: &[[Complex64; N]; N]) -> [[Complex64; N]; N] {
    let mut out = [[ZERO; N]; N];
    for i in 0..N {
        for j in 0..N {
            out[i][j] = m[j][i].conj();
        }
    }
    out
}

/// Single-qubit unitary, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate2x2([[Complex64; 2]; 2]);

impl Gate2x2 {
    pub fn new(m: [[Complex64; 2]; 2]) -> Result<Self> {
        let dev = max_unitary_deviation(&m);
        if dev.is_nan() || dev > UNITARY_TOLERANCE {
            return Err(QkdError::NotUnitary(dev));
        }
        Ok(Gate2x2(m))
    }

    pub fn matrix(&self) -> &[[Complex64; 2]; 2] {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Gate2x2(adjoint(&self.0))
    }

    pub fn identity() -> Self {
        Gate2x2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn x() -> Self {
        Gate2x2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        Gate2x2([[ZERO, -i], [i, ZERO]])
    }

    pub fn z() -> Self {
        Gate2x2([[ONE, ZERO], [ZERO, -ONE]])
    }

    pub fn h() -> Self {
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Gate2x2([[r, r], [r, -r]])
    }

    pub fn s() -> Self {
        Gate2x2([[ONE, ZERO], [ZERO, Complex64::new(0.0, 1.0)]])
    }
}

/// Two-qubit unitary on the ordered pair `(q_a, q_b)`; `q_a` is the high bit of the 4×4 index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate4x4([[Complex64; 4]; 4]);

impl Gate4x4 {
    pub fn new(m: [[Complex64; 4]; 4]) -> Result<Self> {
        let dev = max_unitary_deviation(&m);
        if dev.is_nan() || dev > UNITARY_TOLERANCE {
            return Err(QkdError::NotUnitary(dev));
        }
        Ok(Gate4x4(m))
    }

    pub fn matrix(&self) -> &[[Complex64; 4]; 4] {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Gate4x4(adjoint(&self.0))
    }

    /// Controlled-NOT with control `q_a`, target `q_b`.
    pub fn cnot() -> Self {
        let mut m = [[ZERO; 4]; 4];
        m[0][0] = ONE;
        m[1][1] = ONE;
        m[2][3] = ONE;
        m[3][2] = ONE;
        Gate4x4(m)
    }

    pub fn cz() -> Self {
        let mut m = [[ZERO; 4]; 4];
        m[0][0] = ONE;
        m[1][1] = ONE;
        m[2][2] = ONE;
        m[3][3] = -ONE;
        Gate4x4(m)
    }

    pub fn swap() -> Self {
        let mut m = [[ZERO; 4]; 4];
        m[0][0] = ONE;
        m[1][2] = ONE;
        m[2][1] = ONE;
        m[3][3] = ONE;
        Gate4x4(m)
    }
}

pub fn apply_single_qubit_gate(state: &StateVec, gate: &Gate2x2, qubit: usize) -> Result<StateVec> {
    check_qubit(qubit)?;
    let mask = qubit_mask(qubit);
    let m = gate.matrix();
    let mut out = state.amps;
    for i in (0..DIM).filter(|i| i & mask == 0) {
        let a0 = state.amps[i];
        let a1 = state.amps[i | mask];
        out[i] = m[0][0] * a0 + m[0][1] * a1;
        out[i | mask] = m[1][0] * a0 + m[1][1] * a1;
    }
    Ok(StateVec { amps: out })
}

pub fn apply_two_qubit_gate(state: &StateVec, gate: &Gate4x4, q_a: usize, q_b: usize) -> Result<StateVec> {
    check_qubit(q_a)?;
    check_qubit(q_b)?;
    if q_a == q_b {
        return Err(QkdError::SameQubit(q_a));
    }
    let (ma, mb) = (qubit_mask(q_a), qubit_mask(q_b));
    let m = gate.matrix();
    let mut out = state.amps;
    for base in (0..DIM).filter(|i| i & (ma | mb) == 0) {
        let idx = [base, base | mb, base | ma, base | ma | mb];
        let input = idx.map(|i| state.amps[i]);
        for (row, &target) in idx.iter().enumerate() {
            out[target] = (0..4).map(|col| m[row][col] * input[col]).sum();
        }
    }
    Ok(StateVec { amps: out })
}

/// Moves the bit at standard position `i` to physical position `pattern.image(i)`.
pub fn apply_permutation(state: &StateVec, pattern: &Pattern) -> StateVec {
    let mut out = [ZERO; DIM];
    for (index, amp) in state.amps.iter().enumerate() {
        out[permute_index(index, pattern)] = *amp;
    }
    StateVec { amps: out }
}

/// Basis-index image under [`apply_permutation`].
pub fn permute_index(index: usize, pattern: &Pattern) -> usize {
    let mut target = 0;
    for position in 1..=NUM_QUBITS {
        if index & qubit_mask(position) != 0 {
            target |= qubit_mask(pattern.image(position));
        }
    }
    target
}

/// Projective Z measurement of one qubit with Born-rule sampling.
pub fn measure_qubit<R: Rng + ?Sized>(state: &StateVec, qubit: usize, rng: &mut R) -> Result<(u8, StateVec)> {
    let p1 = state.probability_one(qubit)?;
    let outcome = u8::from(rng.random::<f64>() < p1);
    let p = if outcome == 1 { p1 } else { 1.0 - p1 };
    if p < 1e-12 {
        return Err(QkdError::ProjectionUnderflow(p));
    }
    let mask = qubit_mask(qubit);
    let scale = 1.0 / p.sqrt();
    let mut out = [ZERO; DIM];
    for (i, slot) in out.iter_mut().enumerate() {
        if u8::from(i & mask != 0) == outcome {
            *slot = state.amps[i] * scale;
        }
    }
    Ok((outcome, StateVec { amps: out }))
}

/// Hermitian, unit-trace, positive semidefinite 32×32 operator (row-major).
#[derive(Clone, PartialEq)]
pub struct DensityMatrix {
    entries: Vec<Complex64>,
}

impl fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMatrix").field("trace", &self.trace()).finish_non_exhaustive()
    }
}

impl DensityMatrix {
    pub fn pure(state: &StateVec) -> Self {
        let mut entries = vec![ZERO; DIM * DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                entries[i * DIM + j] = state.amps[i] * state.amps[j].conj();
            }
        }
        DensityMatrix { entries }
    }

    pub fn maximally_mixed() -> Self {
        let mut entries = vec![ZERO; DIM * DIM];
        for i in 0..DIM {
            entries[i * DIM + i] = Complex64::new(1.0 / DIM as f64, 0.0);
        }
        DensityMatrix { entries }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * DIM + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..DIM).map(|i| self.entries[i * DIM + i].re).sum()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..DIM {
            for j in i..DIM {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    /// `weight_a · a + weight_b · b`.
    pub fn mix(weight_a: f64, a: &DensityMatrix, weight_b: f64, b: &DensityMatrix) -> Self {
        let entries = a.entries.iter().zip(b.entries.iter()).map(|(x, y)| x * weight_a + y * weight_b).collect();
        DensityMatrix { entries }
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigen::hermitian_eigenvalues(DIM, &self.entries)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.entries.iter().zip(other.entries.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// `Σ pᵢ |ψᵢ⟩⟨ψᵢ|`.
pub fn density_from_ensemble(members: &[(f64, StateVec)]) -> Result<DensityMatrix> {
    let total: f64 = members.iter().map(|(p, _)| p).sum();
    if members.iter().any(|(p, _)| p.is_nan() || *p < 0.0) || (total - 1.0).abs() > NORM_TOLERANCE {
        return Err(QkdError::ProbabilitySum(total));
    }
    let mut entries = vec![ZERO; DIM * DIM];
    for (p, psi) in members {
        for i in 0..DIM {
            let left = psi.amps[i] * *p;
            for j in 0..DIM {
                entries[i * DIM + j] += left * psi.amps[j].conj();
            }
        }
    }
    Ok(DensityMatrix { entries })
}

/// `−Σ λ log₂ λ`, treating eigenvalues below 1e-15 (including slight negatives) as zero.
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    let s: f64 = eigenvalues.iter().filter(|&&l| l > 1e-15).map(|&l| -l * l.log2()).sum();
    s.max(0.0)
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(entropy_of_spectrum(&rho.eigenvalues()?))
}
