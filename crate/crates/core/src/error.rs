use std::path::PathBuf;

/// Error type shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// All jitter levels failed during a Cholesky factorization.
    #[error("matrix not positive definite (min diagonal pivot {min_pivot:e})")]
    NotPositiveDefinite { min_pivot: f64 },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("sampler failed in block '{block}' at iteration {iteration}: {source}")]
    Block {
        block: &'static str,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path} at row {row}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        msg: String,
    },

    #[error("chain schema version mismatch: found {found}, expected {expected}")]
    SchemaVersion { found: String, expected: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn in_block(self, block: &'static str, iteration: usize) -> Self {
        Error::Block {
            block,
            iteration,
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code class for the CLI: config/validation, io/parse, numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::Json(_) | Error::SchemaVersion { .. } => 3,
            Error::NotPositiveDefinite { .. } | Error::InvalidState(_) | Error::SizeLimit(_) => 4,
            Error::Block { source, .. } => source.exit_code(),
        }
    }
}
