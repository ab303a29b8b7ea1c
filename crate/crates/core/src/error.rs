use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numerical precondition on the inputs was violated.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge after {levels} refinements (estimate {estimate:e}, error {error:e})")]
    NonConvergence {
        levels: usize,
        estimate: f64,
        error: f64,
    },

    /// Circulant embedding produced a significantly negative eigenvalue.
    #[error("circulant embedding failed: eigenvalue {min_eigenvalue:e} below -1e-9 * {max_eigenvalue:e}")]
    EmbeddingFailure {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("covariance matrix is not positive definite at pivot {pivot} (value {value:e})")]
    Factorization { pivot: usize, value: f64 },

    #[error("degenerate estimator denominator {value:e} at t = {t}")]
    DegenerateDenominator { t: f64, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("replication {index} (seed {seed:#018x}) failed: {source}")]
    Replication {
        index: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} replications failed (limit 0.1%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
