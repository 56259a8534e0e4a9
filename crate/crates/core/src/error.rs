use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{what} must not be empty")]
    Empty { what: &'static str },

    #[error("{what} contains a non-finite value at position {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{what}: value {value} at position {index} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("length mismatch: {what} has {actual} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("interval [{x}, {y}] is not a valid 1-based range over {len} entries")]
    BadInterval { x: usize, y: usize, len: usize },

    #[error("trees disagree on the underlying array")]
    MismatchedTrees,

    #[error("infeasible parameters: {0}")]
    Infeasible(&'static str),

    #[error("private normalizer is not positive ({0})")]
    DegenerateNormalizer(f64),
}

impl Error {
    /// True for errors that signal parameter combinations the structures
    /// cannot realize (as opposed to malformed inputs).
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}
