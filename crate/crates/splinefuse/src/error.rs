//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Rotation angle at or near pi, where the principal logarithm is unstable.
    #[error("rotation angle {angle:.6} rad too close to pi for a stable logarithm")]
    NearSingularLog { angle: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("time {t} s outside covered span [{start}, {end}] s")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("under-constrained problem: {0}")]
    UnderConstrained(String),

    #[error("no convergence: {0}")]
    ConvergenceFailure(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Landmark at or behind the camera plane; the caller drops the factor.
    #[error("landmark behind camera (depth {depth:.6} m)")]
    Cheirality { depth: f64 },

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}
