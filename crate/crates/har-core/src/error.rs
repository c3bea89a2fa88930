use thiserror::Error;

/// Errors shared across the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A smooth oracle returned NaN or an overflowed value. Carries the
    /// queried point for diagnostics.
    #[error("oracle returned a non-finite value")]
    OracleFailure { x: Vec<f64> },

    #[error("derivative order {0} is not supported (only p = 1 and p = 2)")]
    UnsupportedOrder(usize),

    #[error("second-order stationarity is only defined for smooth problems (psi = 0)")]
    UnsupportedMeasure,

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// The step is too short to divide by its norm; callers decide whether
    /// this certifies stationarity or is surfaced as a failure.
    #[error("step norm {step_norm:.3e} at or below the degeneracy floor {floor:.3e}")]
    DegenerateStep { step_norm: f64, floor: f64 },

    #[error("subproblem solver failed: {0}")]
    SubproblemFailure(String),

    #[error("hessian is not symmetric (max asymmetry {0:.3e})")]
    NonSymmetricHessian(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("audit history was not retained for this run")]
    AuditUnavailable,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
