use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eig:e} below floor {floor:e}")]
    NotPsd { min_eig: f64, floor: f64 },

    #[error("matrix is not Hermitian: max asymmetry {asym:e} (scale {scale:e})")]
    NotHermitian { asym: f64, scale: f64 },

    #[error("singular system in {0}")]
    Singular(&'static str),

    #[error("config error at line {line}, key `{key}`: {msg}")]
    Config { key: String, line: usize, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            line,
            msg: msg.into(),
        }
    }
}
