//! Error type shared across the planning pipeline.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file: names the offending field or record.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// A record refers to an entity that does not exist.
    #[error("reference error: {0}")]
    Reference(String),

    /// Input violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Polyline vertex lies outside the raster extent.
    #[error("bounds error: {0}")]
    Bounds(String),

    /// Pixel lookup against a raster with different grid geometry.
    #[error("grid geometry mismatch: {0}")]
    Geometry(String),

    /// Statistics requested over an empty population.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Internally inconsistent arguments.
    #[error("inconsistent input: {0}")]
    Inconsistency(String),

    /// Required table entries are missing.
    #[error("data error: {0}")]
    Data(String),

    /// Study configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// LP/MILP failure that should never occur on well-posed models.
    #[error("solver error: {0}")]
    Solver(String),

    /// Time limit expired before any feasible incumbent was found.
    #[error("solver timed out with no incumbent: {0}")]
    NoIncumbent(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Exit-code class used by the CLI: 2 config, 3 data, 4 solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Solver(_) | Error::NoIncumbent(_) => 4,
            _ => 3,
        }
    }
}
