use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the spectral pipeline.
#[derive(Debug, Clone, Error)]
pub enum SpectralError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("boundary matrix is not admissible (residual {residual:.3e})")]
    InvalidBoundary { residual: f64 },

    #[error("lambda = {lambda} is too close to an eigenvalue (guard value {ratio:.3e})")]
    EigenvalueProximity { lambda: Complex64, ratio: f64 },

    #[error("weak Atkinson condition fails (smallest eigenvalue of Omega = {min_eig:.3e})")]
    AtkinsonViolation { min_eig: f64 },

    #[error("degenerate spectrum: every complex number is an eigenvalue")]
    DegenerateSpectrum,

    #[error("numerical consistency check failed: {what} (residual {residual:.3e})")]
    NumericalConsistency { what: String, residual: f64 },

    #[error("eigenspace basis is numerically rank deficient at lambda = {lambda}")]
    RankDeficient { lambda: f64 },

    #[error("precondition failed: {what} (residual {residual:.3e})")]
    Precondition { what: String, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integrand is singular at t = {0}")]
    IntegrandSingular(f64),

    #[error("propagation overflowed at step {0}")]
    Overflow(usize),

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

pub type Result<T> = std::result::Result<T, SpectralError>;
