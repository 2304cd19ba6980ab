use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the calibration library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("non-positive depth {0}")]
    NonPositiveDepth(f64),

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: u32,
        left_h: u32,
        right_w: u32,
        right_h: u32,
    },

    #[error("depth map has no valid pixels")]
    EmptyDepthMap,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("point clouds differ in size ({0} vs {1})")]
    SizeMismatch(usize, usize),

    #[error("correspondence unavailable: cloud lengths differ ({0} vs {1})")]
    CorrespondenceUnavailable(usize, usize),

    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { n: usize, k: usize },

    #[error("gimbal lock: pitch {pitch} rad is within the guard band of ±π/2")]
    GimbalLock { pitch: f64 },

    #[error("non-finite loss encountered at {0}")]
    NonFiniteLoss(String),

    #[error("objective undefined: no photometric overlap and zero point-distance weight")]
    UndefinedObjective,

    #[error("no point projects into the image")]
    NoPointsInView,

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

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
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
