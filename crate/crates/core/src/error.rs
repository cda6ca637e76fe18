use std::path::PathBuf;

use thiserror::Error;

use crate::strip::Strip;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("strip {strip} lies outside a {d_features}x{t_steps} input")]
    StripOutOfBounds {
        strip: Strip,
        d_features: usize,
        t_steps: usize,
    },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("mask entry {value} at ({d}, {t}) is outside [0, 1]")]
    MaskRange { d: usize, t: usize, value: f64 },

    #[error("not a probability vector: {0}")]
    NotProbability(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("model evaluation failed: {0}")]
    Model(String),

    #[error("protocol error: {0}")]
    Protocol(#[from] crate::adapter::ProtocolError),

    #[error("optimizer run failed after {} generations: {source}", history.len().saturating_sub(1))]
    Run {
        #[source]
        source: Box<Error>,
        /// Best fitness per completed generation, initial population first.
        history: Vec<f64>,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures originating in a model or its transport.
    pub fn is_model_failure(&self) -> bool {
        match self {
            Error::Model(_) | Error::Protocol(_) | Error::NotProbability(_) => true,
            Error::Run { source, .. } => source.is_model_failure(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
