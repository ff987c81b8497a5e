use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    Field(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid tuple: {0}")]
    InvalidTuple(String),
    #[error("not p-nilpotent: {0}")]
    NotNilpotent(String),
    #[error("invalid module: {0}")]
    InvalidModule(String),
    #[error("invalid complex: {0}")]
    InvalidComplex(String),
    #[error("sampler exhausted after {0} attempts")]
    SamplerExhausted(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// Short stable identifier, used in machine-readable error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Field(_) => "field",
            Error::Dimension(_) => "dimension",
            Error::DivisionByZero => "division_by_zero",
            Error::InvalidTuple(_) => "invalid_tuple",
            Error::NotNilpotent(_) => "not_nilpotent",
            Error::InvalidModule(_) => "invalid_module",
            Error::InvalidComplex(_) => "invalid_complex",
            Error::SamplerExhausted(_) => "sampler_exhausted",
            Error::Parse(_) => "parse",
            Error::Unsupported(_) => "unsupported",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
