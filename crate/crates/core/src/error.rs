//! Error type shared across the pipeline, with a stable mapping to CLI exit codes.

use std::path::PathBuf;

/// Process exit codes used by the CLI for each error class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    /// Bad flags or flag combinations (exit 2).
    Usage,
    /// Malformed or invalid data and artifacts (exit 3).
    Data,
    /// NaN/Inf or other numeric failures (exit 4).
    Numeric,
    /// Filesystem and I/O failures (exit 5).
    Io,
}

impl ExitClass {
    pub fn code(self) -> i32 {
        match self {
            ExitClass::Usage => 2,
            ExitClass::Data => 3,
            ExitClass::Numeric => 4,
            ExitClass::Io => 5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("shape error: expected {expected}, got {actual} ({context})")]
    Shape {
        expected: usize,
        actual: usize,
        context: String,
    },

    #[error("decode error for {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("load error for {}: {message}", path.display())]
    Load { path: PathBuf, message: String },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Classifies the error for CLI exit-code purposes.
    pub fn exit_class(&self) -> ExitClass {
        match self {
            Error::Usage(_) | Error::Config(_) => ExitClass::Usage,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Domain(_)
            | Error::Ordering(_)
            | Error::Size(_)
            | Error::Shape { .. }
            | Error::Decode { .. }
            | Error::Load { .. }
            | Error::Format { .. } => ExitClass::Data,
            Error::Numeric(_) => ExitClass::Numeric,
            Error::Stage { source, .. } => source.exit_class(),
            Error::Io(_) => ExitClass::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
