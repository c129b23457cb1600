use thiserror::Error;

/// Failure categories surfaced by the library.
///
/// The categories map onto the command-line exit codes: argument and config
/// errors are usage problems, data and I/O errors are data problems, and
/// numerical errors abort a run.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        {
            let ok: bool = $cond;
            if !ok {
                return Err($crate::error::Error::$variant(format!($($arg)+)));
            }
        }
    };
}
pub(crate) use ensure;
