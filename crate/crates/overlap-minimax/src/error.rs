use thiserror::Error;

/// Rows and columns of a Hall-violating cut in a transportation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolatedCut {
    /// Supply rows whose admissible columns cannot absorb their supply.
    pub rows: Vec<usize>,
    /// Every column admissible for at least one of `rows`.
    pub columns: Vec<usize>,
    pub supply: f64,
    pub capacity: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("interior-point solver stalled after {iterations} iterations (relative gap {gap:.3e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("infinite slope between units {i} and {j}: identical covariates but different predictions")]
    InfiniteSlope { i: usize, j: usize },

    #[error("arm {arm} has {available} usable units, at least {needed} required")]
    InsufficientUnits {
        arm: u8,
        available: usize,
        needed: usize,
    },

    #[error("transportation problem infeasible: rows {:?} need {:.6e} but their columns {:?} hold {:.6e}", .0.rows, .0.supply, .0.columns, .0.capacity)]
    Infeasible(ViolatedCut),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("confidence levels differ ({0} vs {1})")]
    LevelMismatch(f64, f64),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
