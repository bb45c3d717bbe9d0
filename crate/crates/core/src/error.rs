use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A convolution or encoder would produce an empty output.
    #[error("invalid geometry: {0}")]
    Geometry(String),

    /// A caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("degenerate variance at index {index}: {value}")]
    DegenerateVariance { index: usize, value: f64 },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("batch error: {0}")]
    Batch(String),

    #[error("harness error: {0}")]
    Harness(String),

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

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Geometry(_) => "geometry",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::DegenerateBatch(_) => "degenerate_batch",
            Error::DegenerateVariance { .. } => "degenerate_variance",
            Error::Metric(_) => "metric",
            Error::Batch(_) => "batch",
            Error::Harness(_) => "harness",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
