use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid depth {0}: depth must be finite and > 0")]
    InvalidDepth(f64),

    /// Returned by cube-to-equirect resampling when the face frusta do not
    /// tile the sphere (only possible below 90 degrees field of view).
    #[error("{pixels} output pixels covering {solid_angle_sr:.6} sr are not seen by any face")]
    Uncovered { pixels: usize, solid_angle_sr: f64 },

    #[error("depth mask selects no valid pixels")]
    EmptyMask,

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True when the failure comes from the input data or arguments rather
    /// than from the environment (file system, sink failure).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io(_) => false,
            Error::Image(image::ImageError::IoError(_)) => false,
            Error::Json(e) => !e.is_io(),
            _ => true,
        }
    }
}

/// Errors raised while decoding one of the on-disk formats.
#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: Vec<u8>, found: Vec<u8> },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated stream: expected {expected} bytes, got {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("{extra} trailing bytes after declared payload")]
    TrailingBytes { extra: u64 },

    #[error("gaussian {index} violates invariant: {reason}")]
    InvalidGaussian { index: usize, reason: String },

    #[error("equirect raster must be 2:1, got {width}x{height}: aspect must be 2:1")]
    AspectRatio { width: usize, height: usize },

    #[error("malformed header: {0}")]
    Header(String),
}
