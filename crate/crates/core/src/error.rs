use thiserror::Error;

/// Errors produced by the transform pipeline, the latency model and the
/// tolerance harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke an operation's precondition (length mismatch, index out of range, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Transform size outside the supported set.
    #[error("unsupported size {n}: {rule}")]
    UnsupportedSize { n: usize, rule: &'static str },

    /// Invalid configuration (tile layout, precision, uncalibrated model).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The latency model could not be fitted to the given measurements.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// A density is too narrow to be represented on the grid.
    #[error("under-resolved density: sigma {sigma} < 1.5 x grid spacing {spacing}")]
    Resolution { sigma: f64, spacing: f64 },

    /// The brute-force reference refuses sizes whose O(n^6) cost is prohibitive.
    #[error("brute-force DFT refused for n = {n} (limit {limit}); pass allow_large to override")]
    TooExpensive { n: usize, limit: usize },

    /// Reading or parsing a measurement table failed.
    #[error("measurement table: {0}")]
    Table(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::ContractViolation(msg.into())
}
