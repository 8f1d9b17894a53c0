use thiserror::Error;

/// Errors produced by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration violates an invariant (bad parameter, coverage hole,
    /// empty or oversized catalog, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called on a state it does not accept.
    #[error("usage error: {0}")]
    Usage(String),

    /// An enumeration or scan would exceed its configured candidate budget.
    #[error("budget exceeded: {candidates} candidates > budget {budget}")]
    BudgetExceeded { candidates: u64, budget: u64 },

    /// A numerically degenerate situation that must not be silently ignored,
    /// e.g. nonzero power assigned to a zero-norm channel block.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// A constraint of the optimization problem was violated at runtime.
    #[error("constraint violation: {0}")]
    Constraint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
