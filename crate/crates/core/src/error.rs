use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyqError {
    #[error("invalid charge law: {0}")]
    InvalidLaw(String),
    #[error("kappa is unbounded on the evaluation grid")]
    KappaUnbounded,
    #[error("quantity is infinite for this law: {0}")]
    Degenerate(String),
    #[error("invalid walk: {0}")]
    InvalidWalk(String),
    #[error("dimension {0} is not supported (expected 1..={max})", max = crate::lattice::MAX_DIM)]
    UnsupportedDimension(usize),
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("enumeration of {paths} paths exceeds the budget of {budget}")]
    BudgetExceeded { paths: u128, budget: u64 },
    #[error("window length {window} is not in 1..={n}")]
    BadWindow { window: usize, n: usize },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, PolyqError>;
