//! Numerical toolkit for a driven flux qubit ultrastrongly coupled to
//! several resonator modes: exact diagonalization of the multi-mode Rabi
//! Hamiltonian, sideband line classification, spectroscopy maps,
//! quasi-degenerate perturbation theory for effective multi-photon
//! couplings, and spectral parameter fitting.

pub mod config;
pub mod eigensolver;
pub mod error;
pub mod fitting;
pub mod hamiltonian;
pub mod operators;
pub mod perturbation;
pub mod spectroscopy;

pub use error::{Error, Result};
