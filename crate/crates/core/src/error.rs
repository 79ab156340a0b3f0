use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An atom fell outside the domain of a translator, or a distribution was malformed.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Brute-force enumeration budget exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("graph error: {0}")]
    Graph(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("ill-conditioned system: {0}")]
    Conditioning(String),
    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("schema error in {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
