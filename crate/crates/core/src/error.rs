//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("unknown world index {0}")]
    UnknownWorld(usize),

    #[error("agent {agent}: symbol index {symbol} outside alphabet of size {alphabet_len}")]
    SymbolOutOfAlphabet {
        agent: usize,
        symbol: usize,
        alphabet_len: usize,
    },

    #[error("profile has {got} symbols but structure has {expected} agents")]
    ProfileLengthMismatch { expected: usize, got: usize },

    #[error("impossible profile: zero marginal probability under every world")]
    ImpossibleProfile,

    #[error("profile count {count} exceeds exhaustive enumeration budget {budget}; use Monte Carlo mode")]
    BudgetExceeded { count: u128, budget: u128 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate welfare: optimal expected welfare is zero")]
    DegenerateWelfare,

    #[error("degenerate belief: zero-probability entry implies an unbounded position")]
    DegenerateBelief,

    #[error("oracle backend error: {message}")]
    Backend {
        message: String,
        /// Raw payload from the external backend, when one was received.
        payload: Option<String>,
    },

    #[error("oracle verdict violates invariants: {0}")]
    MalformedVerdict(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
