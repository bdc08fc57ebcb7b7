use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("covariance not positive definite after jitter up to {max_jitter:e}")]
    Conditioning { max_jitter: f64 },

    #[error("quadrature reached {achieved:e} relative accuracy, target was {target:e}")]
    QuadratureAccuracy { achieved: f64, target: f64 },

    #[error("circulant embedding eigenvalue {value:e} below tolerance (max eigenvalue {max:e})")]
    Embedding { value: f64, max: f64 },

    #[error("sample path carries no stored increments")]
    MissingIncrements,

    #[error("unsupported order: {0}")]
    UnsupportedOrder(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
