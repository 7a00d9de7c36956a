//! Numerical toolkit for average-fidelity estimation of quantum channels on
//! bipartite qudit systems.
//!
//! The library simulates the survive-probability protocols that recover the
//! average fidelity of a trace-preserving map on H_D⊗H_D from three
//! measurable averages (joint survival and the two subsystem survivals), in
//! exact-expectation and finite-shot Monte Carlo modes. On top of that it
//! provides state 2-designs (SIC sets, complete MUBs), single-qubit Clifford
//! twirling, reconstruction of process-matrix elements over a Pauli operator
//! basis, and the reduced-input approximation with its closed-form
//! Hilbert-Schmidt error analysis.

pub mod approx;
pub mod channels;
pub mod chi;
pub mod clifford;
pub mod designs;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod states;

pub use error::{Error, Result};
