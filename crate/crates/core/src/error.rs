use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// [`Error::code`] gives the stable identifier printed by the command-line
/// front end (`ERROR <code>: <message>`).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid times must be strictly increasing (t[{index}] = {next} follows {prev})")]
    NonIncreasing { index: usize, prev: f64, next: f64 },
    #[error("grid time t[{index}] = {value} is negative")]
    NegativeTime { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel matrix is singular: {0}")]
    SingularGram(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("band is not completable: 2x2 block at {index} is not positive definite")]
    NotCompletable { index: usize },
    #[error("matrix is not positive definite (pivot {index})")]
    NotPositiveDefinite { index: usize },
    #[error("matrix is singular (pivot {index})")]
    Singular { index: usize },
    #[error("audit needs at least {required} paths, found {found}")]
    TooFewPaths { required: usize, found: usize },
    #[error("FIR order {order} exceeds data length {len}")]
    OrderTooLarge { order: usize, len: usize },
    #[error("search space is empty: {0}")]
    EmptySearchSpace(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyGrid => "Empty",
            Error::NonIncreasing { .. } => "NonIncreasing",
            Error::NegativeTime { .. } => "NegativeTime",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::SingularGram(_) => "SingularGram",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::NotCompletable { .. } => "NotCompletable",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::Singular { .. } => "Singular",
            Error::TooFewPaths { .. } => "TooFewPaths",
            Error::OrderTooLarge { .. } => "OrderTooLarge",
            Error::EmptySearchSpace(_) => "EmptySearchSpace",
            Error::Parse(_) => "ParseError",
        }
    }
}
