use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} out of range for {len} sites")]
    Index { index: usize, len: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("state norm {norm} deviates from 1")]
    Norm { norm: f64 },

    #[error("operator is not Hermitian (residue {residue:e})")]
    Hermiticity { residue: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("linear chain unstable: mode eigenvalue {eigenvalue:e} < 0 (N = {n_ions}, beta = {beta})")]
    Stability {
        n_ions: usize,
        beta: f64,
        eigenvalue: f64,
    },

    #[error("beatnote {mu} resonant with phonon mode {mode} (omega = {omega})")]
    Resonance { mu: f64, mode: usize, omega: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear solve failed: residual {residual:e} above tolerance {tolerance:e}")]
    Solver { residual: f64, tolerance: f64 },

    #[error("norm drift {drift:e} exceeds {limit:e}")]
    IntegrationQuality { drift: f64, limit: f64 },

    #[error("dimension {dim} exceeds capability limit {limit}")]
    Capability { dim: usize, limit: usize },

    #[error("ground state is degenerate (splitting {splitting:e})")]
    Degeneracy { splitting: f64 },

    #[error("eigenbasis incomplete: sum of overlaps {sum} vs norm {norm}")]
    Basis { sum: f64, norm: f64 },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("insufficient data: {got} samples, need at least {need}")]
    InsufficientData { got: usize, need: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
