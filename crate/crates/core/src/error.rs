use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid support interval [{a}, {b}]: need finite a < b")]
    InvalidSupport { a: f64, b: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("value {value} lies outside the support [{a}, {b}]")]
    OutOfSupport { value: f64, a: f64, b: f64 },
    #[error("mixture weights sum to {sum}, expected 1")]
    WeightMismatch { sum: f64 },
    #[error("distributions do not share a common support")]
    SupportMismatch,
    #[error("invalid atom list: {0}")]
    InvalidAtoms(String),
    #[error("quantile level {0} is not in (0, 1)")]
    InvalidTau(f64),
    #[error("invalid covariate space: {0}")]
    InvalidSpace(String),
    #[error("decision rule or array built on a different covariate space")]
    SpaceMismatch,
    #[error("row {row} of the decision rule is not on the simplex")]
    InvalidSimplex { row: usize },
    #[error("invalid conditional cdf array: {0}")]
    InvalidArray(String),
    #[error("unknown group label {0:?}")]
    UnknownGroup(String),
    #[error("group {0:?} has zero probability mass")]
    ZeroGroupMass(String),
    #[error("preference parameter {0} is not in [0, 1]")]
    InvalidLambda(f64),
    #[error("distance to an empty set of rules")]
    EmptySet,
    #[error("invalid training record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },
    #[error("invalid propensity model: {0}")]
    InvalidPropensity(String),
    #[error("zero propensity for treatment {treatment} at x={x:?}, z={z:?}")]
    ZeroPropensity { treatment: usize, x: String, z: String },
    #[error("estimated propensity is zero for treatment {treatment} at x={x:?}, z={z:?}")]
    ZeroEstimatedPropensity { treatment: usize, x: String, z: String },
    #[error("objective returned a non-finite value ({0})")]
    NonFiniteObjective(f64),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),
    #[error("lambda {0} is not on the grid")]
    LambdaNotOnGrid(f64),
    #[error("invalid budget {0}: must be positive")]
    InvalidBudget(f64),
    #[error("grid is not the uniform grid {{0, 1/m, ..., 1}}")]
    NonUniformGrid,
    #[error("parse error in row {row}: {reason}")]
    Parse { row: usize, reason: String },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
