use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time {t} lies beyond the path horizon {end}")]
    BeyondHorizon { t: f64, end: f64 },
    #[error("no left limit at time 0")]
    NoLeftLimit,
    #[error("clock value {t} is at or beyond the life-time {total}")]
    BeyondLifetime { t: f64, total: f64 },
    #[error("paths do not share a time axis: {0}")]
    TimeAxisMismatch(String),
    #[error("numeric overflow: {0}")]
    Overflow(String),
    #[error("point outside the domain: {0}")]
    Domain(String),
    #[error("degenerate jacobian: {0}")]
    Degenerate(String),
    #[error("classification conflict: {0}")]
    ClassificationConflict(String),
    #[error("no admissible path inside the domain: {0}")]
    Connectivity(String),
    #[error("inversion failed: {0}")]
    Inversion(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("empty sample")]
    EmptySample,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
