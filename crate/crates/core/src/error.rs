use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature vector norm {norm} exceeds 1")]
    FeatureNorm { norm: f64 },

    #[error("candidate arm list is empty")]
    EmptyArms,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("could not place cluster centers at pairwise gap >= {gap} within {attempts} attempts")]
    InfeasibleGap { gap: f64, attempts: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}: no rating records")]
    EmptyInput(PathBuf),

    #[error("requested {requested} {what}, only {available} available")]
    NotEnough {
        what: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("instance not separable at this eps_star: gamma1/{divisor} = {lhs} <= {rhs}")]
    NotSeparable { divisor: u32, lhs: f64, rhs: f64 },

    #[error("trial results are misaligned: {0}")]
    Misaligned(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("policy {policy} failed at round {round} (user {user}): {source}")]
    Policy {
        policy: String,
        round: usize,
        user: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
