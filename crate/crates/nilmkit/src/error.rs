//! Crate-wide error type.
//!
//! Errors fall into three broad classes, which the command-line tool maps to
//! process exit codes: configuration / argument problems (exit 2), data and
//! file-format problems (exit 3), and numeric failures (exit 4).

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A sequence had the wrong length (empty, not a power of two, ...).
    #[error("bad size for {what}: {details}")]
    Size { what: &'static str, details: String },

    /// An argument was out of range or inconsistent with the data.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A configuration value or file is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A signal did not look like a mains waveform (no zero crossing, ...).
    #[error("malformed signal: {0}")]
    MalformedSignal(String),

    /// An operation needed samples outside the available stream.
    #[error("out of bounds: {0}")]
    Boundary(String),

    /// An input was numerically degenerate (zero span, missing fundamental).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Iterative training made no progress within its damping budget.
    #[error("training stalled: {0}")]
    TrainingStalled(String),

    /// A corpus directory is missing its header file.
    #[error("corpus header not found: {0}")]
    CorpusMissingHeader(PathBuf),

    /// Channel files in a corpus disagree on sample count.
    #[error("inconsistent corpus: channel {channel} has {got} samples, expected {expected}")]
    CorpusInconsistentLength { channel: u32, got: usize, expected: usize },

    /// A corpus or database file failed to parse.
    #[error("parse error in {file} line {line}: {details}")]
    Parse { file: PathBuf, line: usize, details: String },

    /// A database header declares a schema this build does not understand.
    #[error("unsupported {kind} schema version {got} (this build reads version {supported}); \
             re-export the file with a matching toolkit version")]
    SchemaVersion { kind: &'static str, got: u32, supported: u32 },

    /// Another writer holds the database lock.
    #[error("database {0} is locked by a concurrent writer")]
    ConcurrentWrite(PathBuf),

    /// Too few events survived filtering to build a dataset.
    #[error("insufficient data: {got} events after the {filter} filter, need at least {needed}")]
    InsufficientData { got: usize, needed: usize, filter: &'static str },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::MalformedSignal(format!("JSON encoding failed: {e}"))
    }
}

impl Error {
    /// Process exit code used by the `nilm` binary: 2 = configuration or
    /// argument error, 3 = data error, 4 = numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Config(_) => 2,
            Error::Size { .. }
            | Error::MalformedSignal(_)
            | Error::Boundary(_)
            | Error::CorpusMissingHeader(_)
            | Error::CorpusInconsistentLength { .. }
            | Error::Parse { .. }
            | Error::SchemaVersion { .. }
            | Error::ConcurrentWrite(_)
            | Error::InsufficientData { .. }
            | Error::Io(_) => 3,
            Error::DegenerateInput(_) | Error::TrainingStalled(_) => 4,
        }
    }
}
