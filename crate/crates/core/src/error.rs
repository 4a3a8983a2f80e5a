//! Crate-wide error type.

use std::fmt;

/// Errors produced by scene loading, configuration validation, and the
/// numerical operations that have documented failure modes.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scene or config file could not be parsed.
    Parse(String),
    /// A validated invariant of a scene/config value failed.
    Invalid(String),
    /// A referenced id (material, RRU, track) does not exist.
    UnknownId(String),
    /// BVH construction over an empty triangle list.
    EmptyScene,
    /// An argument fell outside the mathematical domain of an operation.
    Domain(String),
    /// Covariance rank too low for the requested MUSIC model order.
    RankDeficient { rank: usize, model_order: usize },
    /// No position can be produced (empty candidate set or zero total weight).
    NoPosition,
    /// Line fit over points whose abscissae are all identical.
    DegenerateAbscissae,
    /// Tracker update with a TTI older than already-buffered data.
    NonMonotonicTti { last: u64, got: u64 },
    /// Underlying I/O failure, carried as text to keep the type cloneable.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Invalid(msg) => write!(f, "invalid value: {msg}"),
            Error::UnknownId(msg) => write!(f, "unknown id: {msg}"),
            Error::EmptyScene => write!(f, "empty scene"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::RankDeficient { rank, model_order } => write!(
                f,
                "covariance rank {rank} too low for model order {model_order}"
            ),
            Error::NoPosition => write!(f, "no position"),
            Error::DegenerateAbscissae => write!(f, "degenerate abscissae"),
            Error::NonMonotonicTti { last, got } => {
                write!(f, "non-monotonic tti: got {got} after {last}")
            }
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
