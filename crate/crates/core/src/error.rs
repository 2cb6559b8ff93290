use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// The parameters are valid but the quantity is not defined there
    /// (for example moment sums at the critical point c = 1).
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{what} = {value} exceeds the cap {cap}")]
    CapExceeded { what: &'static str, value: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }

    /// True for errors caused by bad input rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidArgument { .. } | Error::Unsupported(_) | Error::CapExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
