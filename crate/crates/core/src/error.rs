use alloc::string::String;

/// Errors raised by the solver.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument is outside the domain of a closed-form function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A bracketed root does not exist.
    #[error("no root: {0}")]
    NoRoot(String),
    /// A query fell outside the range covered by a trajectory.
    #[error("range error: {0}")]
    Range(String),
    /// The right-hand side was evaluated on the singular set `|u| = |v|`.
    #[error("singular set |u| = |v| reached at r = {r}")]
    Singularity { r: f64 },
    /// The adaptive step collapsed.
    #[error("step size underflow at r = {r} (u = {u}, v = {v})")]
    StepUnderflow { r: f64, u: f64, v: f64 },
    /// A NaN or infinity appeared in the state.
    #[error("non-finite state at r = {r}: {what}")]
    NonFinite { r: f64, what: String },
    /// Step budget exhausted.
    #[error("step budget of {0} exhausted")]
    StepBudget(usize),
    /// The nodal search could not bracket or resolve a solution.
    #[error("search failed: {0}")]
    SearchFailed(String),
    /// Records disagree on their nodal structure.
    #[error("structural error: {0}")]
    Structure(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
