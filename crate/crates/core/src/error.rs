use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AslError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AslError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {what} at coordinate {index}")]
    NonFinite { what: String, index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("feature file {} holds {actual} values, manifest declares {expected}", path.display())]
    DimensionMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("video {video}: label {label} out of range for {num_classes} classes")]
    LabelOutOfRange {
        video: String,
        label: usize,
        num_classes: usize,
    },

    #[error("unknown video id {0:?}")]
    UnknownVideo(String),

    #[error("video {0:?} has no ground-truth segments")]
    MissingGroundTruth(String),

    #[error("model expects C={model_classes} d={model_dim}, dataset has C={data_classes} d={data_dim}")]
    ModelMismatch {
        model_classes: usize,
        model_dim: usize,
        data_classes: usize,
        data_dim: usize,
    },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },
}

impl AslError {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        AslError::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AslError::Io {
            path: path.into(),
            source,
        }
    }

    /// Broad failure class, used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            AslError::Config(_) | AslError::Contract(_) => ErrorKind::Config,
            AslError::MissingFile(_)
            | AslError::Io { .. }
            | AslError::Parse { .. }
            | AslError::DimensionMismatch { .. } => ErrorKind::Io,
            AslError::Shape { .. } | AslError::NonFinite { .. } | AslError::Divergence { .. } => ErrorKind::Numeric,
            AslError::LabelOutOfRange { .. }
            | AslError::UnknownVideo(_)
            | AslError::MissingGroundTruth(_)
            | AslError::ModelMismatch { .. } => ErrorKind::Input,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Numeric,
    Input,
}
