use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error("spectral assumption violated: {0}")]
    SpectralAssumption(String),
    #[error("no connecting orbit: {0}")]
    NoConnection(String),
    #[error("nonconvergence: {0}")]
    NonConvergence(String),
    #[error("series did not converge: {}", .0.summary())]
    SeriesNonConvergence(Box<crate::resummation::SeriesLedger>),
    #[error("extra unstable eigenvalues: {0}")]
    ExtraUnstable(String),
    #[error("smallness box violated: {0}")]
    SmallnessBox(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("root not found: {0}")]
    RootNotFound(String),
    #[error("branch point a = {a}: {source}")]
    AtSample { a: f64, source: Box<Error> },
    #[error("truncation active at solution: {0}")]
    TruncationActive(String),
}

pub type Result<T> = std::result::Result<T, Error>;
