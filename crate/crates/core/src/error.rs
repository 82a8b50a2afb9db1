use thiserror::Error;

/// Errors raised across the recovery pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: max |H - H^H| = {defect:e} exceeds {tol:e}")]
    NonHermitianInput { defect: f64, tol: f64 },

    #[error("complex entry {value:e} in a real-valued model")]
    ComplexInRealModel { value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("threshold {value} at row {row} is negative; the squared-inequality path needs tau >= 0")]
    NegativeThreshold { row: usize, value: f64 },

    #[error("inequality system has no rows")]
    EmptySystem,

    #[error("row {row} has zero norm")]
    ZeroNormRow { row: usize },

    #[error("{m} measurements is below the dimension bound of {required} for n = {n}")]
    BelowDimensionBound { n: usize, m: usize, required: usize },

    #[error("lead eigenvalue {value:e} is not positive")]
    NonPositiveLeadEigenvalue { value: f64 },

    #[error("reference matrix is zero")]
    ZeroReference,

    #[error("noise level sigma must be positive, got {0}")]
    InvalidSigma(f64),

    #[error("error tail is not decaying: {0}")]
    TailNotDecaying(String),

    #[error("target {eps1:e} is not above the iteration floor {floor:e}")]
    InfeasibleTarget { eps1: f64, floor: f64 },

    #[error("did not converge within {iters} iterations")]
    MaxItersExceeded { iters: usize },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
