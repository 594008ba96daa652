use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point outside the domain: {0}")]
    OutOfDomain(String),
    #[error("trajectory left the evaluation slab at x1 = {x1}")]
    IntegrationDomain { x1: f64 },
    #[error("non-finite value encountered: {0}")]
    Numeric(String),
    #[error("data does not cover the request: {0}")]
    DataCoverage(String),
    #[error("capability not available: {0}")]
    Capability(String),
    #[error("field is not in the range of the curl: {0}")]
    NotInRange(String),
    #[error("incompatible data: {0}")]
    Incompatible(String),
    #[error("trajectory nearly tangent to the inflow boundary (|u.n| = {0:e})")]
    NearTangency(f64),
    #[error("invalid velocity data: {0}")]
    InvalidVelocity(String),
    #[error("step-count cap of {0} exceeded")]
    StepCap(usize),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("formula not applicable: {0}")]
    Inapplicable(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
