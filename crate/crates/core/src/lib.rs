//! Analysis of quantum systems defined by a prepotential.
//!
//! A single real function W(q) fixes everything here. The ground state is
//! exp(W/hbar) with energy exactly zero; the classical potential
//! V_C = |grad W|^2/2 has its equilibrium where W is maximal; the operator
//! -grad W . grad has polynomial-like eigenfunctions built from elementary
//! excitations, one per normal mode; and the O(hbar) part of every quantum
//! level is a non-negative integer combination of the normal-mode
//! frequencies. The modules below walk that chain:
//!
//! - [`systems`]: prepotentials, their derivatives, and both potentials
//! - [`equilibrium`]: Newton search for grad W = 0 and mode analysis
//! - [`classical`]: the transport operator and its eigenfunctions
//! - [`quantum`]: 1D grid spectra with convergence control
//! - [`correspondence`]: hbar sweeps, fits, and integer decompositions
//! - [`report`]: CSV rendering of the result types

pub mod classical;
pub mod correspondence;
pub mod equilibrium;
mod error;
mod linalg;
pub mod quantum;
pub mod report;
pub mod systems;

pub use error::{Error, Result};
