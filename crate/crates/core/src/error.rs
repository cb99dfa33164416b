use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("argument outside the curve domain: {0}")]
    Domain(String),

    /// The activities do not sum to a finite value; no translation-invariant
    /// Gibbs measure exists.
    #[error("divergent activities: no translation-invariant Gibbs measure exists")]
    DivergentActivities,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("expected a unique boundary law but found {count} positive solutions")]
    NotUnique { count: usize },

    #[error("index {index} lies outside the window [-{window}, {window}]")]
    WindowTooSmall { index: i64, window: u32 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("enumeration too large: {0}")]
    TooLarge(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
