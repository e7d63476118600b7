use thiserror::Error;

/// Errors raised by the solver, its building blocks and the harness.
#[derive(Debug, Error)]
pub enum IsadError {
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: String,
        found: String,
        context: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain guard: {0}")]
    Domain(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("inconsistent oracle input: {0}")]
    InconsistentInput(String),

    #[error("iterates left the bounded region: |x|+|y|+|z| = {norm:.3e} exceeds {guard:.3e} at round {round}")]
    Unbounded { round: usize, norm: f64, guard: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IsadError>;

pub(crate) fn check_len(expected: usize, found: usize, context: &'static str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(IsadError::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
            context,
        })
    }
}

pub(crate) fn check_shape(expected: (usize, usize), found: (usize, usize), context: &'static str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(IsadError::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
            context,
        })
    }
}
