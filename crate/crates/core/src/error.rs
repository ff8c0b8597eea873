use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: String,
        got: String,
    },

    #[error("size error: {0}")]
    Size(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The Carleman weight is singular at `t = 0` and `t = T`.
    #[error("singular weight at t = {t}: l(t) vanishes")]
    SingularWeight { t: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Trajectory fixed-point iteration failed; carries the residual history.
    #[error("fixed-point iteration did not converge after {} sweeps (last residual {:e})", .history.len(), .history.last().copied().unwrap_or(f64::NAN))]
    Convergence { history: Vec<f64> },

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn shape_err(what: &'static str, expected: impl ToString, got: impl ToString) -> LabError {
    LabError::Shape {
        what,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
