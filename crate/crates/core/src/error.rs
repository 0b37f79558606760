use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("inconsistent partition: m_s + m_f = {partition_len} but state has length {state_len}")]
    InconsistentPartition {
        partition_len: usize,
        state_len: usize,
    },

    #[error("non-finite function value while perturbing coordinate {index}")]
    NonFiniteEvaluation { index: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rank-deficient sample matrix: numerical rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("no spectral gap: all eigenvalue moduli are equal")]
    ZeroGap,

    #[error("insufficient spectral gap: best consecutive modulus ratio {ratio:.4} at split {split} does not exceed {threshold}")]
    InsufficientGap {
        ratio: f64,
        split: usize,
        threshold: f64,
    },

    #[error("split after {requested} eigenvalues separates a complex-conjugate pair; nearest valid split is {suggested}")]
    SplitsConjugatePair { requested: usize, suggested: usize },

    #[error("invalid split m_f = {m_f} for dimension {n}")]
    InvalidSplit { m_f: usize, n: usize },

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("turning point: |det dF_f/dv| = {det:.3e} below threshold {threshold:.3e}")]
    TurningPoint { det: f64, threshold: f64 },

    #[error("second-order correction requires {0}")]
    MissingSecondOrderData(&'static str),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("boundary data not set for {0}")]
    MissingBoundary(&'static str),

    #[error("newton iteration failed to converge (residual {residual:.3e} after {iterations} iterations)")]
    NewtonFailed { residual: f64, iterations: usize },

    #[error("time step fell below minimum {dt_min:.3e}")]
    StepTooSmall { dt_min: f64 },

    #[error("no root bracketed along the fast direction in [{lo:.6e}, {hi:.6e}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("equilibrium search failed: {0}")]
    EquilibriumNotFound(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
