//! Error types shared by the whole crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A cell parameter violated one of its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A constitutive relation was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix/system assembly failed (singular geometry, bad grid, ...).
    #[error("assembly error: {0}")]
    Assembly(String),

    /// Open circuit potential requested outside the tabulated/fitted range.
    #[error("OCP extrapolation: {0}")]
    OcpRange(String),

    /// Input data is malformed or inconsistent.
    #[error("input error: {0}")]
    Input(String),

    /// Configuration file problem.
    #[error("config error: {0}")]
    Config(String),

    /// CSV or filesystem I/O problem.
    #[error("io error: {0}")]
    Io(String),

    /// Search/analysis could not produce a result.
    #[error("analysis error: {0}")]
    Analysis(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
