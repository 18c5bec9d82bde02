use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants map one-to-one onto the failure classes of the public
/// operations so callers (and the CLI exit-code logic) can tell a bad
/// input from a numerical breakdown.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("inadmissible weight: {0}")]
    InadmissibleWeight(String),

    #[error("weight is not homogeneous")]
    NotHomogeneous,

    #[error("ambiguous boundary normal at {0:?}")]
    AmbiguousNormal(Vec<f64>),

    #[error("cone has no boundary")]
    NoBoundary,

    #[error("point {0:?} is not on the cone boundary")]
    NotOnBoundary(Vec<f64>),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("non-finite value encountered: {0}")]
    Evaluation(String),

    #[error("decay contract violated: {0}")]
    DecayContract(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("basis degree too high: {0}")]
    DegreeTooHigh(String),

    #[error("mean-zero violation: constant component {0:e}")]
    MeanZeroViolation(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
