use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("expected a probability measure, total mass is {mass}")]
    NotProbability { mass: f64 },
    #[error("measure has empty support")]
    EmptySupport,
    #[error("combined support has {atoms} atoms, oracle limit is {limit}")]
    SupportTooLarge { atoms: usize, limit: usize },
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("ground size mismatch: {left} vs {right}")]
    GroundMismatch { left: usize, right: usize },
    #[error("matrix is not square")]
    NotSquare,
    #[error("not a permutation of 0..{n}")]
    NotPermutation { n: usize },
    #[error("{what}: {count} exceeds enumeration budget {limit}")]
    BudgetExceeded { what: String, count: f64, limit: f64 },
    #[error("decoration is not bounded on value {value}")]
    UnboundedDecoration { value: f64 },
    #[error("law of the test vector is at distance {measured} from partition laws, above delta {delta}")]
    RoundingPrecondition { measured: f64, delta: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
