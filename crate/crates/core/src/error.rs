use thiserror::Error;

/// Errors raised by the library.
///
/// Variants fall in two families: [`Error::is_validation`] errors come from
/// bad configuration or arguments, everything else is a data problem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Validation(String),

    #[error("negative demand at position {position} of series {id}")]
    NegativeDemand { id: String, position: usize },

    #[error("non-numeric value {value:?} at position {position} of series {id}")]
    NonNumeric {
        id: String,
        position: usize,
        value: String,
    },

    #[error("duplicate series id {0}")]
    DuplicateId(String),

    #[error("malformed csv: {0}")]
    Malformed(String),

    #[error("no demand observed in series {0}")]
    NoDemand(String),

    #[error("series too short for meta-training: {id} has {len} observations, needs {needed}")]
    TooShort { id: String, len: usize, needed: usize },

    #[error("series too short for entropy")]
    TooShortForEntropy,

    #[error("undefined scale: history has no variation")]
    UndefinedScale,

    #[error("no residuals available")]
    NoResiduals,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no usable series: {0}")]
    NoUsableSeries(String),

    #[error("unknown series ids: {}", .0.join(", "))]
    UnknownIds(Vec<String>),

    #[error("series without forecasts: {}", .0.join(", "))]
    MissingIds(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::DimensionMismatch { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
