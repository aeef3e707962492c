use thiserror::Error;

use crate::params::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing parameter `{0}`")]
    MissingKey(String),

    #[error("unknown parameter `{0}`")]
    UnknownKey(String),

    #[error("parameter `{key}` is not finite: {value}")]
    NonFinite { key: String, value: f64 },

    #[error("count `{key}` must be a non-negative integer, got {value}")]
    BadCount { key: String, value: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),

    #[error("structural violation: {}", join(.0))]
    Structural(Vec<Violation>),

    #[error("no feasible point found in {starts} starts ({detail})")]
    Infeasible { starts: usize, detail: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("too many rank-deficient draws: {rejected} of {attempted}")]
    RejectionCascade { rejected: usize, attempted: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
