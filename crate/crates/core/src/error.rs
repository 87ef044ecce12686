use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the depth-fusion pipeline and its file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid depth {0} (must be positive and finite)")]
    InvalidDepth(f64),

    #[error("pixel ({col}, {row}) outside {width}x{height} image")]
    OutOfBounds {
        col: f64,
        row: f64,
        width: u32,
        height: u32,
    },

    #[error("point with z = {z} is behind the camera")]
    BehindCamera { z: f64 },

    #[error("raster shape {got_width}x{got_height} does not match expected {width}x{height}")]
    ShapeMismatch {
        width: u32,
        height: u32,
        got_width: u32,
        got_height: u32,
    },

    #[error("invalid variance {0} (must be positive and finite)")]
    InvalidVariance(f64),

    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("no keyframe at or before t = {frame_ts}")]
    NoKeyframe { frame_ts: f64 },

    #[error("scale support {support} below minimum {min_support} and no previous estimate")]
    NoScale { support: usize, min_support: usize },

    #[error("no pose within {tolerance} s of t = {timestamp} in trajectory")]
    NoPose { timestamp: f64, tolerance: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{file}: {msg}")]
    Format { file: PathBuf, msg: String },

    #[error("{file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: {source}")]
    Image {
        file: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("dataset {root}: {msg}")]
    Dataset { root: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(file: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let file = file.into();
        move |source| Error::Io { file, source }
    }

    /// Parse error pointing at a file and line.
    pub fn parse(file: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn format(file: impl Into<PathBuf>, msg: impl Into<String>) -> Error {
        Error::Format {
            file: file.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by the input data or configuration rather than
    /// by a bug; the CLI maps these to a distinct exit status.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::InvalidDepth(_) | Error::BehindCamera { .. } | Error::OutOfBounds { .. }
        )
    }
}
