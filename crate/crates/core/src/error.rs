use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("integration failed at step {step}: {reason}")]
    IntegrationFailure { step: usize, reason: String },
    #[error("unsupported configuration: vector field `{field}` has no derivative")]
    MissingDerivative { field: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("gramian is not invertible in practice (condition number {condition:e})")]
    NotControllable { condition: f64 },
    #[error(
        "steady-state solve did not converge after {iterations} iterations (residual {residual:e})"
    )]
    SteadySolve { iterations: usize, residual: f64 },
    #[error("steering failed: terminal error {terminal_error:e} above threshold {threshold:e}")]
    SteeringFailed { terminal_error: f64, threshold: f64 },
    #[error("internal consistency violation: {0}")]
    Internal(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
