use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("infeasible: least-squares residual {ls_residual:.6e} exceeds epsilon {epsilon:.6e}")]
    Infeasible { ls_residual: f64, epsilon: f64 },

    #[error("enumeration of {count} supports exceeds the limit of {limit}")]
    CombinatorialLimit { count: u128, limit: u128 },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("column {0} is constant")]
    ConstantColumn(usize),

    #[error("certificate is not valid: {0}")]
    InvalidCertificate(String),

    #[error("{0}")]
    NonMonotone(String),
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
