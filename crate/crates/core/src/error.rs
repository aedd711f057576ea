use std::path::PathBuf;

/// Errors raised by the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },

    #[error("kernel not integrable: {0}")]
    KernelNotIntegrable(String),

    #[error("invalid kernel table: {0}")]
    InvalidKernel(String),

    #[error("invalid b = {b}: 1F1 has a pole at non-positive integer b")]
    InvalidB { b: f64 },

    #[error("1F1({a}; {b}; {z}) accuracy unreachable: achieved relative error estimate {achieved:e}")]
    AccuracyUnreachable { a: f64, b: f64, z: f64, achieved: f64 },

    #[error("tail exponent {alpha} is not integrable (needs alpha > 1)")]
    NonIntegrableTail { alpha: f64 },

    #[error("negative density {value:e} at grid index {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operator assembly inconsistent: column sum {residual:e} at column {column}")]
    Assembly { column: usize, residual: f64 },

    #[error("banded solve broke down: zero pivot at row {row}")]
    SingularMatrix { row: usize },

    #[error("steady state not reached by t = {t}: last rate {rate:e} above tolerance {tol:e}")]
    NotConverged { t: f64, rate: f64, tol: f64 },

    #[error("{divergent} of {total} trajectories diverged; step size too large for these parameters")]
    DivergentEnsemble { divergent: usize, total: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("correlation too long for spectral gap: {0}")]
    CorrelationTooLong(String),

    #[error("matrix exponential overflow (norm {norm:e})")]
    ExpOverflow { norm: f64 },

    #[error("unstable drift matrix: eigenvalue with real part {re} <= 0")]
    UnstableDrift { re: f64 },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("{path}:{line}: {msg}")]
    Config { path: PathBuf, line: usize, msg: String },

    #[error("missing config key `{0}`")]
    MissingKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_param(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason })
    }
}
