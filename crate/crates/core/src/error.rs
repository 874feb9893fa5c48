use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two adjacent nodes coincide, so a tangent direction is undefined.
    #[error("singular configuration: nodes {0} and {1} coincide")]
    SingularConfiguration(usize, usize),

    #[error("invalid hybrid transition: {0}")]
    InvalidTransition(&'static str),

    /// Integration produced a non-finite value.
    #[error("integration diverged at t = {time:.6} s (first offending node {node})")]
    Divergence { node: usize, time: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate training set: all fluctuation snapshots vanish")]
    DegenerateTraining,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("planning failed in segment {segment}: max constraint violation {violation:.4e}")]
    PlanningFailure { segment: usize, violation: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
