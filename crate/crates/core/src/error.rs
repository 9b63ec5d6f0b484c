use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KljnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// A signal whose variance is zero was handed to an operation that
    /// normalizes by its RMS.
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error(
        "resistor inference degenerate: measured R_P = {r_parallel:.3} ohm, own R = {r_own:.3} ohm"
    )]
    InferenceDegenerate { r_parallel: f64, r_own: f64 },

    #[error("trial {index} failed: {source}")]
    Trial {
        index: u64,
        #[source]
        source: Box<KljnError>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, KljnError>;

impl KljnError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        KljnError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KljnError::Io {
            path: path.into(),
            source,
        }
    }
}
