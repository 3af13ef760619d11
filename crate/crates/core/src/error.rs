use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("mode {mode} out of range (model has {modes} modes)")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("matrix shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("conditional expectation over {msteps} steps exceeds the delay {delay}; inputs would not be measurable")]
    NotMeasurable { msteps: usize, delay: usize },

    #[error("W is not positive definite at time {time}, mode {mode} (1-based)", mode = .mode + 1)]
    WNotPositiveDefinite { time: usize, mode: usize },

    #[error("Riccati tables are not solvable; the gain schedule is undefined")]
    NotSolvable,

    #[error("path budget exceeded: {required} paths needed, budget is {budget}")]
    PathBudgetExceeded { required: u128, budget: u128 },

    #[error("QP has {vars} variables, above the dense-solve limit of {limit}")]
    QpTooLarge { vars: usize, limit: usize },

    #[error("QP Hessian is not positive definite")]
    HessianNotPD,

    #[error("{0}")]
    Singular(String),

    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
