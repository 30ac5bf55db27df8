use thiserror::Error;

/// Errors produced by the solvers and their supporting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty point set")]
    EmptySet,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("geometric median did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("need at least {k} points, got {points}")]
    TooFewPoints { k: usize, points: usize },

    #[error("simplex grid would hold more than {max_points} points")]
    GridTooLarge { max_points: usize },

    #[error("instance is not full: group {group} has {size} points, k = {k}")]
    NotFullInstance { group: usize, size: usize, k: usize },

    #[error("exhaustive enumeration too large: {count} candidates exceeds limit {limit}")]
    TooLarge { count: f64, limit: f64 },

    #[error("search budget exceeded: {nodes} nodes > limit {limit}")]
    BudgetExceeded { nodes: u64, limit: u64 },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad generator spec: {0}")]
    BadSpec(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error stems from malformed or inconsistent input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInstance(_)
                | Error::InvalidPartition(_)
                | Error::InvalidConfig(_)
                | Error::BadSpec(_)
                | Error::Parse { .. }
                | Error::NotFullInstance { .. }
                | Error::DimensionMismatch { .. }
        )
    }

    /// Whether the error is a resource-limit refusal rather than a failure.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::BudgetExceeded { .. } | Error::TooLarge { .. } | Error::GridTooLarge { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
