use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("singular one-excitation denominator at E = {0}")]
    SingularGreen(num_complex::Complex64),
    #[error("degenerate quartic roots at E = {0}")]
    DegenerateRoots(f64),
    #[error("singular coefficient denominator: {what} = {value}")]
    SingularCoefficient {
        what: &'static str,
        value: num_complex::Complex64,
    },
    #[error("ill-conditioned Nystrom system (condition number {0:e})")]
    IllConditioned(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
