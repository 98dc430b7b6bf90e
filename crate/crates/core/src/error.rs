use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("measure weight at point {index} must be positive and finite, got {value}")]
    NonPositiveMeasure { index: usize, value: f64 },

    #[error("metric axiom violated at ({i}, {j}, {k}): {reason}")]
    MetricViolation {
        i: usize,
        j: usize,
        k: usize,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty point set")]
    EmptySet,

    #[error("point index {index} out of range for a space of {n} points")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("compact nest level {level} is empty or missing")]
    EmptyCompact { level: usize },

    #[error("compact nest is not increasing at level {level}")]
    NonIncreasingNest { level: usize },

    #[error("invalid approximation data at point {index}: {reason}")]
    InvalidData { index: usize, reason: String },

    #[error("brute-force oracle limited to 10 points, got {n}")]
    TooLarge { n: usize },

    #[error("invalid radius {radius}: {reason}")]
    InvalidRadius { radius: f64, reason: String },

    #[error("delta schedule must be positive and non-increasing (entry {position})")]
    NonMonotoneDeltas { position: usize },

    #[error("space has no coordinates; curve-level operations are unavailable")]
    NoCoordinates,

    #[error("grid resolution {m} too low for frequency {n} (need m >= 100 and m >= 10n)")]
    ResolutionTooLow { m: usize, n: u32 },

    #[error("exponent p = {0} must lie in [1, inf)")]
    InvalidExponent(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
