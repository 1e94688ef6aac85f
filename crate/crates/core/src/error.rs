use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a thermodynamic relation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("advective Courant number {courant:.4} exceeds 1 in the {direction}-sweep at cell ({i}, {k})")]
    CflViolation {
        courant: f64,
        direction: char,
        i: usize,
        k: usize,
    },

    #[error("linear solver failed after {iterations} iterations: relative residual {residual:.3e} (breakdown: {breakdown})")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        breakdown: bool,
    },

    #[error("non-finite or non-positive state at t = {time} s: {what}")]
    InvalidState { time: f64, what: String },

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
