use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),
    /// A numerical certificate exceeded its threshold.
    #[error("certificate failure: {0}")]
    Certificate(String),
    #[error("fixed-point iteration diverged after {sweeps} sweeps (deltas {history:?})")]
    Diverged { sweeps: usize, history: Vec<f64> },
    #[error("non-finite value in right-hand side at t = {t}")]
    NonFinite { t: f64 },
    #[error("interval {index}: {source}")]
    Interval {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("pole hit: I - zS is singular at z = {0}")]
    PoleHit(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
