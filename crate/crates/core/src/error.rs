use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time {t} outside the domain [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },

    #[error("no left limit at t = 0")]
    NoLeftLimit,

    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: f64, right: f64 },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("{t} is not a point of the partition")]
    NotAPartitionPoint { t: f64 },

    #[error("partition level {level} is not available: {reason}")]
    LevelUnavailable { level: usize, reason: String },

    #[error("function is not non-decreasing: drop of {drop} at t = {t}")]
    NotMonotone { t: f64, drop: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "condition (L) violated at t = {t}: limit mass {limit_mass}, squared path jump {jump_square}"
    )]
    LebesgueViolation {
        t: f64,
        limit_mass: f64,
        jump_square: f64,
    },

    #[error("continuous part decreases by {drop} at t = {t}")]
    ContinuousPartDecreasing { t: f64, drop: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("horizon {t} is an atom of the target measure")]
    AtomHorizon { t: f64 },

    #[error(
        "increment matrix on [{from}, {to}] is not positive semidefinite (eigenvalue {eigenvalue})"
    )]
    NotPsd { from: f64, to: f64, eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("limit undecided: {0}")]
    Undecided(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
