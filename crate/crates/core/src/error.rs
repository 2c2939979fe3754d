use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("correlation undefined: {0} has zero variance on the integration range")]
    UndefinedCorrelation(&'static str),

    #[error("angle undefined: zero-norm signal")]
    UndefinedAngle,

    #[error("feedback gain {alpha} >= 1 makes the ring unstable (set allow_unstable to override)")]
    UnstableGain { alpha: f64 },

    #[error("simulation diverged: {0}")]
    Diverged(String),

    #[error("missing trace data: {0}")]
    MissingTrace(&'static str),

    #[error("readout window underrun: need {needed} steps per image, trace has {available}")]
    WindowUnderrun { needed: usize, available: usize },

    #[error("labels are not one-hot (row {row})")]
    NotOneHot { row: usize },

    #[error("bad magic number in {path}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("truncated file {path}: expected {expected} bytes of payload, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("record size mismatch in {path}: {len} bytes is not a multiple of {record}")]
    RecordSize {
        path: PathBuf,
        len: usize,
        record: usize,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
