use thiserror::Error;

/// Errors produced by the numerical kernels and tree operations.
///
/// Variants split into two families: invalid input (dimensions, parameters,
/// malformed data) and numerical failure (loss of positive definiteness,
/// iteration that did not converge). Front ends map the families to distinct
/// exit codes.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (lambda_min = {lambda_min:e}, lambda_max = {lambda_max:e})")]
    NotPositiveDefinite { lambda_min: f64, lambda_max: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_diag:e})")]
    EigenNoConvergence { sweeps: usize, off_diag: f64 },

    #[error("power iteration did not converge after {iterations} iterations (last delta {last_delta:e}, residual {residual:e})")]
    PowerNoConvergence {
        iterations: usize,
        last_delta: f64,
        residual: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("depth {got} too small, need at least {needed}")]
    DepthTooSmall { needed: usize, got: usize },

    #[error("interval ({level},{position}) has no children at this depth")]
    LeafInterval { level: u32, position: u64 },

    #[error("state dimension {dim} exceeds the dense solver limit {limit}")]
    StateTooLarge { dim: usize, limit: usize },

    #[error("degenerate regression input: {0}")]
    DegenerateRegression(String),
}

impl Error {
    /// True for errors of the numerical-failure family (as opposed to
    /// invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::EigenNoConvergence { .. }
                | Error::PowerNoConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
