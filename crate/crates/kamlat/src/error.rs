use thiserror::Error;

#[derive(Debug, Error)]
pub enum KamError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("layout mismatch: {0}")]
    Layout(String),
    #[error("matrix is not hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("eigensolver did not converge after {0} sweeps")]
    EigenFailure(usize),
    #[error("zero divisor at k = {k:?}")]
    ZeroDivisor { k: Vec<i32> },
    #[error("smallness condition violated: {what} = {value:e} > {bound:e}")]
    Smallness { what: String, value: f64, bound: f64 },
    #[error("series did not terminate within {0} terms")]
    SeriesTail(usize),
    #[error("point left the domain: {0}")]
    DomainEscape(String),
    #[error("quadrature resolutions disagree by {0:e}")]
    Quadrature(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, KamError>;
