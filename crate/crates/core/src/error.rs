use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate edge: both endpoints are {0}")]
    DegenerateEdge(String),

    #[error("offset must be nonzero")]
    ZeroOffset,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {0} lies outside the domain")]
    OutOfDomain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("malformed path trace: {0}")]
    MalformedTrace(String),

    #[error("coupling violated: {0}")]
    CouplingViolated(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

impl Error {
    /// True for failures caused by size limits rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource(_))
    }
}
