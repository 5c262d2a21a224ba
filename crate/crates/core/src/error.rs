use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cell index {index:?} out of range 1..={bins}")]
    IndexOutOfRange { index: Vec<usize>, bins: usize },

    #[error("unknown model `{name}` (available: {available})")]
    UnknownModel { name: String, available: String },

    #[error("non-finite state at integration step {step}")]
    NonFiniteState { step: u64 },

    #[error("non-finite fitness at q = {q:?}")]
    NonFiniteFitness { q: Vec<f64> },

    #[error("negative density {value} at cell {index:?}")]
    NegativeDensity { index: Vec<usize>, value: f64 },

    #[error("time series is empty")]
    EmptyTimeSeries,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (blow-up, non-finite objective)
    /// as opposed to bad input or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteState { .. } | Error::NonFiniteFitness { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Json(_) | Error::Format(_))
    }
}
