use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HintError>;

#[derive(Debug, Error)]
pub enum HintError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Input data violates a structural invariant (duplicate ids, bad indices,
    /// asymmetric matrices, mismatched lengths).
    #[error("validation error: {0}")]
    Validation(String),

    /// A parameter or parameter combination is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    /// The Cayley system was singular for this step size; retry with a smaller one.
    #[error("step too large (tau = {tau:e}): Cayley system is singular")]
    StepTooLarge { tau: f64 },
}

impl HintError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HintError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, HintError::Numerical { .. } | HintError::StepTooLarge { .. })
    }
}
