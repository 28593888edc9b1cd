use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of a function.
    #[error("domain error in {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    /// Invalid physical parameters when building a model object.
    #[error("invalid construction: {0}")]
    Construction(String),

    /// Inconsistent numerical configuration (grids, tolerances, regimes).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Mismatched array lengths or grids.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Not enough data to form an estimate.
    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("singular response: {0}")]
    SingularResponse(String),

    /// Quadrature did not reach the requested tolerance.
    #[error("quadrature failed to converge: estimate {value:e} with error {error:e} after {subdivisions} subdivisions")]
    Quadrature {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            function,
            detail: detail.into(),
        }
    }
}
