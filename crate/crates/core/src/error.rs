use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the pipeline.
///
/// Every variant maps onto one of three broad categories (see [`ErrorKind`])
/// that the command-line front end turns into process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box ({x_min}, {y_min}, {x_max}, {y_max}): {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },

    #[error("decode error at cell ({cell_x}, {cell_y}) anchor {anchor}: {reason}")]
    Decode {
        cell_x: usize,
        cell_y: usize,
        anchor: usize,
        reason: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported format version {found:?} (supported major version {supported})")]
    UnsupportedVersion { found: String, supported: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid scene parameters: {0}")]
    InvalidParams(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{} image(s) failed:\n  {}", .0.len(), join_errors(.0))]
    Batch(Vec<Error>),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, thresholds or dataset configuration.
    Config,
    /// Unreadable, malformed or inconsistent input data.
    Data,
    /// A broken internal invariant.
    Internal,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidParams(_) | Error::UndefinedMetric(_) => {
                ErrorKind::Config
            }
            Error::InvalidBox { .. }
            | Error::Decode { .. }
            | Error::Format(_)
            | Error::UnsupportedVersion { .. }
            | Error::Io { .. }
            | Error::Image { .. }
            | Error::Json { .. }
            | Error::Csv { .. } => ErrorKind::Data,
            Error::Batch(errs) => errs.first().map_or(ErrorKind::Internal, Error::kind),
            Error::Invariant(_) => ErrorKind::Internal,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_errors(errs: &[Error]) -> String {
    errs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n  ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
