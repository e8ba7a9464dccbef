use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("empty menu")]
    EmptyMenu,

    #[error("infeasible assignment: {0}")]
    Infeasible(String),

    #[error("decomposition requires integer quotas")]
    NonIntegerQuotas,

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
