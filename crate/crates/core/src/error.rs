use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: invalid item `{id}`: {message}")]
    InvalidItem {
        path: PathBuf,
        line: usize,
        id: String,
        message: String,
    },

    #[error("duplicate id `{id}` in {source_name} source")]
    DuplicateId { id: String, source_name: String },

    #[error("triple `{id}` has no BLEU score; run the QC scoring step first")]
    MissingBleu { id: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("provider error for model `{model}`: {message}")]
    Provider { model: String, message: String },

    #[error("coder sheets disagree on item ids: {0}")]
    SheetMismatch(String),

    #[error("{0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, AuditError>;

impl AuditError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AuditError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 provider.
    pub fn exit_code(&self) -> i32 {
        match self {
            AuditError::Config(_) | AuditError::InvalidArgument(_) => 1,
            AuditError::Provider { .. } => 3,
            _ => 2,
        }
    }
}
