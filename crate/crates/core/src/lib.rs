//! Simulation and security analysis of pattern-based quantum key distribution over the
//! five-qubit perfect code.
//!
//! Logical bits are encoded into [[5,1,3]] codewords whose physical qubit order is scrambled
//! by one of two secret permutation patterns. Decoding with the wrong pattern turns into a
//! logical error, so an eavesdropper that does not know the pattern set shows up as a high
//! multi-qubit error rate (MQER) on the disclosed test bits.

pub mod analysis;
pub mod channel;
pub mod code5;
pub mod eigen;
pub mod error;
pub mod patterns;
pub mod protocol;
pub mod quantum;

pub use error::{QkdError, Result};
