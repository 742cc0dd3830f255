use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },

    #[error("dimension mismatch for `{id}`: expected {expected}, got {got}")]
    Dimension { id: String, expected: usize, got: usize },

    #[error("no embedding row for question `{0}`")]
    MissingEmbedding(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported container version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("truncated container: {0}")]
    Truncated(String),

    #[error("malformed container: {0}")]
    Container(String),

    #[error("base systems are not aligned; missing ids: {}", .0.join(","))]
    Alignment(Vec<String>),

    #[error("non-finite {what} at epoch {epoch}")]
    NonFinite { what: String, epoch: usize },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("split (seed {seed_index}, fold {fold_index}): {source}")]
    Split {
        seed_index: usize,
        fold_index: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Short stable name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::DuplicateId(_) => "duplicate_id",
            Error::UnknownLabel { .. } => "unknown_label",
            Error::Dimension { .. } => "dimension",
            Error::MissingEmbedding(_) => "missing_embedding",
            Error::Shape(_) => "shape",
            Error::Version { .. } => "version",
            Error::Truncated(_) => "truncated",
            Error::Container(_) => "container",
            Error::Alignment(_) => "alignment",
            Error::NonFinite { .. } => "non_finite",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::Invalid(_) => "invalid",
            Error::Split { source, .. } => source.kind(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonFinite { .. } | Error::NonFiniteGradient(_) => ErrorClass::Numerical,
            Error::Invalid(_) => ErrorClass::Config,
            Error::Split { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}
