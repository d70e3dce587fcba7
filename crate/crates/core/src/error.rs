use thiserror::Error;

pub type Result<T, E = NlsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NlsError {
    /// A field or scalar input carried a NaN or infinity.
    #[error("numerical input error: {0}")]
    NumericalInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The input lies outside the domain of the operation (zero state,
    /// degenerate fiber, invalid parameter).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("integrator failure at step {step}: {message}")]
    Integrator { step: usize, message: String },

    #[error("malformed field file: {0}")]
    FieldFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NlsError {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        NlsError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
