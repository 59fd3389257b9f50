use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the processing chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("frame {width}x{height} is smaller than one {pattern}x{pattern} mosaic block")]
    DimensionTooSmall {
        width: usize,
        height: usize,
        pattern: usize,
    },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("layout error: expected {expected}, got {actual}")]
    Layout {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("feature count mismatch: model expects {expected}, cube has {actual}")]
    FeatureMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty mask")]
    EmptyMask,

    #[error("center depth has no valid sample")]
    EmptyDepth,

    #[error("singular intrinsic matrix")]
    SingularIntrinsics,

    #[error("wire format: {0}")]
    Wire(String),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad or missing data rather than bad configuration.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidInput(_) | Error::Json(_))
    }
}
