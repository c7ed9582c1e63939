use thiserror::Error;

/// Errors raised by the simulator and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QkdError {
    #[error("qubit position {0} is outside 1..=5")]
    QubitOutOfRange(usize),
    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    SameQubit(usize),
    #[error("gate is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("state contains a non-finite amplitude")]
    NonFinite,
    #[error("ensemble probabilities must be non-negative and sum to 1 (sum = {0})")]
    ProbabilitySum(f64),
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("sampled a measurement outcome with probability {0:e}")]
    ProjectionUnderflow(f64),
    #[error("invalid pattern {0:?}: entries must be a permutation of 1..=5")]
    InvalidPattern(Vec<u8>),
    #[error("patterns {0} and {1} are at distance {2}; a pattern set needs distance >= 3")]
    PatternsTooClose(String, String, usize),
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("mean photon number must be finite and >= 0, got {0}")]
    NegativeMean(f64),
    #[error("invalid session configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, QkdError>;
