use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An oracle produced a non-finite value.
    #[error("numeric overflow in task {task}: {context}")]
    NumericOverflow { task: usize, context: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Semantic validation failure of a config key.
    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },

    /// Malformed config document (carries the parser's line/column info).
    #[error("config syntax error: {0}")]
    ConfigSyntax(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trace format error: {0}")]
    Trace(String),

    /// An error raised while executing iteration `t` of an optimizer run.
    #[error("iteration {t}: {source}")]
    AtIteration {
        t: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for overflow errors, including ones wrapped with an iteration index.
    pub fn is_overflow(&self) -> bool {
        match self {
            Error::NumericOverflow { .. } => true,
            Error::AtIteration { source, .. } => source.is_overflow(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
