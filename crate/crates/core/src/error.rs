//! Error type shared across the library.

use thiserror::Error;

/// Everything that can go wrong while building systems or running the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown system `{0}` (available: harmonic, poschl_teller, calogero_a)")]
    UnknownSystem(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} lies outside the domain of `{system}`")]
    OutsideDomain { system: String, point: Vec<f64> },

    #[error(
        "equilibrium search did not converge after {iterations} iterations \
         (best iterate {best:?} with |grad W| = {grad_norm:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        best: Vec<f64>,
        grad_norm: f64,
    },

    #[error("point is not stationary: |grad W| = {grad_norm:.3e} exceeds {limit:.1e}")]
    NotStationary { grad_norm: f64, limit: f64 },

    #[error(
        "stationary point {point:?} is not a maximum of the prepotential \
         (smallest frequency {min_frequency:.3e} < 0)"
    )]
    NotAMaximum { point: Vec<f64>, min_frequency: f64 },

    #[error(
        "curvature cross-check failed: classical-potential Hessian eigenvalues deviate \
         from squared frequencies by {residual:.3e} (relative)"
    )]
    CurvatureMismatch { residual: f64 },

    #[error("sampling rejected too many points ({rejected} of {drawn} draws outside the domain)")]
    SamplingExhausted { rejected: usize, drawn: usize },

    #[error("spectrum did not converge after {doublings} grid doublings: {diagnostics}")]
    SpectrumNotConverged { doublings: usize, diagnostics: String },

    #[error("{context} requires a one-dimensional system (dimension = {dimension})")]
    NotOneDimensional {
        context: &'static str,
        dimension: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
