use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("user {user} is nulled by the beamformer (quadratic form {value:e})")]
    NulledUser { user: usize, value: f64 },

    #[error("series did not reach tolerance {tol:e} within {max_terms} terms (bound {bound:e})")]
    SeriesTruncation { tol: f64, max_terms: usize, bound: f64 },

    #[error("integral did not converge: {0}")]
    NonConvergence(String),

    #[error("retraction hit a zero entry after {0} step halvings")]
    DegenerateRetraction(usize),

    #[error("serialization: {0}")]
    Serialization(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
