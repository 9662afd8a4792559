//! Library error type.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain of the requested quantity.
    Domain(String),
    /// Correlation pair outside the valid covariance cone (layer-1 relay
    /// mutual-information numerator would be non-positive).
    InfeasibleCorrelation { numerator: f64 },
    /// Rate not supportable by the source-relay link at maximal correlation
    /// (negative discriminant in the power re-allocation).
    InfeasibleRate { rate: f64 },
    /// Constructor argument violates a type invariant.
    InvalidParameter(String),
    /// Interpolation target outside the tabulated range.
    OutOfRange(String),
    /// Malformed sweep specification or table.
    InvalidSpec(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::InfeasibleCorrelation { numerator } => write!(
                f,
                "infeasible correlation pair: relay log argument {numerator} <= 0"
            ),
            Error::InfeasibleRate { rate } => write!(
                f,
                "rate {rate} not supportable by the source-relay link at maximal correlation"
            ),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::OutOfRange(msg) => write!(f, "out of range: {msg}"),
            Error::InvalidSpec(msg) => write!(f, "invalid sweep spec: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
