use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{norm} smoothness is not registered for the {family} cost function")]
    UnsupportedNorm { family: String, norm: String },

    #[error("point outside the regularizer domain: {0}")]
    Domain(String),

    #[error("outcome index {index} out of range for {dimension} outcomes")]
    InvalidOutcome { index: usize, dimension: usize },

    #[error("quadrature did not converge after {intervals} intervals (error estimate {estimate:e})")]
    Quadrature { intervals: usize, estimate: f64 },

    #[error("budget solver stopped after {iterations} iterations with violation {violation:e}")]
    SolverFailure {
        iterations: usize,
        violation: f64,
        /// Best feasible iterate seen before giving up.
        best_feasible: Vec<f64>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line front end: 1 for bad
    /// input or configuration, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Quadrature { .. } | Error::SolverFailure { .. } => 2,
            _ => 1,
        }
    }
}
