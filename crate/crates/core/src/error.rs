use std::fmt;

/// A single problem found while validating a game.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// 1-based agent index, `None` for game-level problems.
    pub agent: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.agent {
            Some(i) => write!(f, "agent {i}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid game: {}", join(.0))]
    InvalidGame(Vec<Violation>),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("eigendecomposition did not converge after {0} sweeps")]
    NoConvergence(usize),

    /// The dual multiplier does not exceed the largest eigenvalue of `Q`, so the
    /// inner maximisation over `ξ` is unbounded.
    #[error("infinite supremum: lambda {lambda} <= lambda_max(Q) {lambda_max}")]
    InfiniteSupremum { lambda: f64, lambda_max: f64 },

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("non-finite mapping value at iteration {iter}")]
    NonFinite { iter: usize, z: Vec<f64> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
