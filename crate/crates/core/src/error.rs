use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{name} must be positive, got {value}")]
    Domain { name: &'static str, value: f64 },
    #[error("shape mismatch in {context}: expected {expected:?}, got {found:?}")]
    Shape {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid dimension: {0}")]
    InvalidDimension(&'static str),
    #[error("{0} is undefined for an all-zero input")]
    ZeroInput(&'static str),
    #[error("document {0} has no nonzero counts")]
    EmptyDocument(usize),
    #[error("label {0} has no documents")]
    EmptyLabel(usize),
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error("degenerate state: {0}")]
    Degenerate(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { name, value })
    }
}
