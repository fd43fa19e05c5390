use thiserror::Error;

pub type Result<T> = std::result::Result<T, GemError>;

#[derive(Debug, Error)]
pub enum GemError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("non-finite numerical state: {0}")]
    NumericalState(String),

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("no signal in fit window")]
    NoSignal,

    #[error("undersampled: {0}")]
    Undersampled(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid key `{key}`: {message}")]
    Semantic { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GemError {
    /// Stable machine-readable class name, used by the CLI for error reporting.
    pub fn class(&self) -> &'static str {
        match self {
            GemError::InvalidParameter(_) => "invalid-parameter",
            GemError::Validation(_) => "validation",
            GemError::NumericalState(_) => "numerical-state",
            GemError::IntegrationFailure(_) => "integration-failure",
            GemError::NoSignal => "no-signal",
            GemError::Undersampled(_) => "undersampled",
            GemError::Syntax { .. } => "syntax",
            GemError::Semantic { .. } => "semantic",
            GemError::Io(_) => "io",
        }
    }
}
