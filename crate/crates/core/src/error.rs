use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("mesh is not watertight ({0}); sign of the distance is undefined")]
    NotWatertight(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("unknown shape id {0}")]
    UnknownShape(usize),

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("evaluation aborted: {0}")]
    EvaluationAborted(String),

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// Stable machine-readable identifier, used by the CLI and HTTP layers.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape_mismatch",
            Error::State(_) => "invalid_state",
            Error::NotWatertight(_) => "not_watertight",
            Error::Degenerate(_) => "degenerate",
            Error::Parameter(_) => "invalid_parameter",
            Error::Config(_) => "invalid_config",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::UnsupportedModel(_) => "unsupported_model",
            Error::UnknownShape(_) => "unknown_shape",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::EvaluationAborted(_) => "evaluation_aborted",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
