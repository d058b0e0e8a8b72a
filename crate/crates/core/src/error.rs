use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability {value} for user {user} is outside [0, 1]")]
    InvalidProbability { user: usize, value: f64 },

    #[error("user index {index} out of range for {n_users} users")]
    UserOutOfRange { index: usize, n_users: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("cannot parse schedule {input:?}: {reason}")]
    ScheduleParse { input: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("enumeration cap exceeded: n = {n} > cap {cap} (raise the cap explicitly to override)")]
    EnumerationCap { n: usize, cap: usize },

    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("target throughput is outside the candidate region (separation margin {margin:.3e})")]
    InfeasibleTarget { margin: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
