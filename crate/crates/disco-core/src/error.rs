use std::path::PathBuf;

/// Errors produced by the library.
///
/// The CLI maps these onto exit codes: `Numeric` failures are exit code 1,
/// everything else (bad files, bad arguments) is exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An underlying filesystem operation failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but its contents do not parse. `line` is 1-based;
    /// 0 means the problem is not tied to a single line (e.g. a bad header).
    #[error("{path}: line {line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Arguments are structurally inconsistent (shape mismatches, empty
    /// inputs, out-of-range ids, invalid configuration values).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Training or evaluation produced non-finite values.
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
