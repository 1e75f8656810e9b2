use thiserror::Error;

use crate::game::Violation;
use crate::solvers::PreconditionIssue;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid simplex point: {0}")]
    InvalidPoint(String),

    #[error("invalid game: {}", join(.0))]
    InvalidGame(Vec<Violation>),

    #[error("finite-difference step {h} leaves the nonnegative orthant at component {index}")]
    StepTooLarge { index: usize, h: f64 },

    #[error("precondition violated: {}", join(.0))]
    PreconditionViolated(Vec<PreconditionIssue>),

    #[error("policy emitted outflow {outflow} from action {} holding only {mass}", .action + 1)]
    BoundViolation { action: usize, outflow: f64, mass: f64 },

    #[error("invalid redistribution policy: {0}")]
    InvalidPolicy(String),

    #[error("minimum switching cost is zero")]
    ZeroCMin,

    #[error("global Lipschitz constant is zero")]
    ZeroLipschitz,

    #[error("game has fewer than two actions")]
    TooFewActions,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid generator parameters: {0}")]
    InvalidSpec(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
