use std::path::PathBuf;

use dicca_core::Error as CoreError;

/// Failure of a command, classified by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit 2: the run configuration or a flag is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Exit 3: an input file could not be read or parsed.
    #[error("data error: {0}")]
    Data(String),

    /// Exit 4: training produced non-finite values.
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    /// Exit 5: model and data disagree on shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Exit 1: anything else, such as an output directory that cannot be written.
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Diverged { .. } => 4,
            CliError::Shape(_) => 5,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }

    pub fn write(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { context: format!("cannot write {}", path.into().display()), source }
    }

    /// Classify a library error raised while handling input data.
    pub fn from_data(e: CoreError) -> Self {
        match e {
            CoreError::Format { .. } | CoreError::UnsupportedVersion { .. } | CoreError::Io(_) => {
                CliError::Data(e.to_string())
            }
            other => Self::from(other),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidConfig(_) | CoreError::InvalidStructure(_) | CoreError::InvalidSplit(_) => {
                CliError::Config(e.to_string())
            }
            CoreError::Format { .. } | CoreError::UnsupportedVersion { .. } => CliError::Data(e.to_string()),
            CoreError::TrainingDiverged { epoch, batch } => CliError::Diverged { epoch, batch },
            CoreError::ShapeMismatch(_) | CoreError::InvalidView { .. } | CoreError::InvalidIndex(_) => {
                CliError::Shape(e.to_string())
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
