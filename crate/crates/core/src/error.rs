use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("covariance is not positive definite after ridge (smallest eigenvalue {min_eigenvalue:e})")]
    SingularCovariance { min_eigenvalue: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid view index {index} (model has {views} views)")]
    InvalidView { index: usize, views: usize },

    #[error("invalid tape: {0}")]
    InvalidTape(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-finite gradient in {path}")]
    NonFiniteGradient { path: String },

    #[error("training diverged at epoch {epoch}, batch {batch}")]
    TrainingDiverged { epoch: usize, batch: usize },

    #[error("view {0} has zero total sum of squares")]
    DegenerateView(usize),

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("invalid planted structure: {0}")]
    InvalidStructure(String),

    #[error("format error in {}: {message}", path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<memory>".into()))]
    Format { path: Option<PathBuf>, message: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("unsupported model version {found:?} (expected {expected:?})")]
    UnsupportedVersion { found: String, expected: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(message: impl Into<String>) -> Self {
        Error::Format { path: None, message: message.into() }
    }

    /// Attach a file path to a format error produced by an in-memory parser.
    pub fn with_path(self, p: impl Into<PathBuf>) -> Self {
        match self {
            Error::Format { path: None, message } => Error::Format { path: Some(p.into()), message },
            other => other,
        }
    }
}
