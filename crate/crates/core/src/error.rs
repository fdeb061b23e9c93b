use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("matrix J_{index} not skew-symmetric at ({row},{col})")]
    NotSkew { index: usize, row: usize, col: usize },
    #[error("dimension mismatch at {field}: expected {expected}, found {found}")]
    Dimension {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("model error: {0}")]
    Model(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl Error {
    /// True for errors raised while reading a spec document.
    pub fn is_parse(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::NotSkew { .. } | Error::Dimension { .. }
        )
    }
}
