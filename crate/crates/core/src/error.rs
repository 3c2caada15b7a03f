use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch at layer {layer}: {detail}")]
    Shape { layer: usize, detail: String },

    #[error("epoch window out of bounds for {} event(s): {events:?}", events.len())]
    WindowOutOfBounds { events: Vec<usize> },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("class {0} absent from training data")]
    MissingClass(u8),

    #[error("model is not fitted")]
    NotFitted,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("checkpoint layer specification does not match the network")]
    SpecMismatch,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::NonFinite(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
