//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A constellation must hold at least one point.
    #[error("constellation is empty")]
    EmptyConstellation,

    /// Every point sits at the origin, so no scale factor reaches the power budget.
    #[error("cannot normalize an all-zero constellation")]
    ZeroPower,

    /// The polar (high-SNR) likelihood and the pairwise statistics are singular at |x| = 0.
    #[error("point {index} lies at the origin; GAP-D and the snr-likelihood are undefined there, use lpn-d / phn-likelihood")]
    OriginPoint { index: usize },

    /// Index out of range or a degenerate index pair.
    #[error("invalid symbol index: {0}")]
    InvalidIndex(String),

    /// Text could not be parsed into the requested value.
    #[error("parse error: {0}")]
    Parse(String),

    /// The global search could not produce a single admissible local optimum.
    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag used by the CLI error JSON and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::EmptyConstellation => "empty-constellation",
            Error::ZeroPower => "zero-power",
            Error::OriginPoint { .. } => "origin-point",
            Error::InvalidIndex(_) => "invalid-index",
            Error::Parse(_) => "parse",
            Error::Optimization(_) => "optimization",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
