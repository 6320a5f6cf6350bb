use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid coefficient on triangle {triangle}: kappa = {re} + {im}i is not admissible")]
    InvalidCoefficient { triangle: usize, re: f64, im: f64 },

    #[error("unknown curve tag `{0}`")]
    UnknownTag(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("factorization failed: {reason}")]
    FactorizationFailure { reason: String },

    #[error("degenerate support: no mesh triangle intersects the region")]
    DegenerateSupport,

    #[error("no peak found: {0}")]
    NoPeak(String),

    #[error("non-finite objective value at {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    /// True for failures of the numerics, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::FactorizationFailure { .. }
                | Error::DegenerateSupport
                | Error::NoPeak(_)
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
