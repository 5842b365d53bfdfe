//! Constrained-subspace encoding of fermionic Hamiltonians onto a minimal
//! qubit register, with measurement-circuit generation and a statevector
//! simulator for end-to-end checks.

pub mod circuit;
pub mod constraint;
pub mod error;
pub mod fermion;
pub mod linalg;
pub mod mapping;
pub mod measure;
pub mod numfmt;
pub mod sim;
pub mod vqe;

pub use error::{Error, Result};
