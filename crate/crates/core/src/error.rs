use std::path::PathBuf;

/// Errors produced by the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    Shape {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("unsupported maxval {maxval} in {path} (only 255 is supported)")]
    UnsupportedMaxval { path: PathBuf, maxval: u32 },

    #[error("unsupported audio format in {path}: {reason}")]
    UnsupportedAudio { path: PathBuf, reason: String },

    #[error("malformed WAV chunk structure in {path}: {reason}")]
    MalformedChunk { path: PathBuf, reason: String },

    #[error("inconsistent frame size in {path}: expected {expected}, found {found}")]
    InconsistentFrames {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("no frames found in {0}")]
    NoFrames(PathBuf),

    #[error("bad magic in weight file {0}")]
    BadMagic(PathBuf),

    #[error("checksum mismatch in weight file {path}: stored {stored:016x}, computed {computed:016x}")]
    ChecksumMismatch { path: PathBuf, stored: u64, computed: u64 },

    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::Shape {
            op,
            left: left.into(),
            right: right.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem or malformed input files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MalformedHeader { .. }
                | Error::Truncated { .. }
                | Error::UnsupportedMaxval { .. }
                | Error::UnsupportedAudio { .. }
                | Error::MalformedChunk { .. }
                | Error::InconsistentFrames { .. }
                | Error::NoFrames(_)
                | Error::BadMagic(_)
                | Error::ChecksumMismatch { .. }
                | Error::Csv { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
