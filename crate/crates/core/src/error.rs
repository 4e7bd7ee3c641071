use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at {location}: {reason}")]
    Malformed { location: String, reason: String },

    #[error("duplicate tweet id `{0}`")]
    DuplicateId(String),

    #[error("tweet id `{0}` is not present in the corpus")]
    UnknownId(String),

    #[error("tweet `{id}`: category `{category}` given for a not-relevant tweet")]
    TaxonomyViolation { id: String, category: String },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("{context}: empty class {}", classes.join(", "))]
    EmptyClass {
        context: String,
        classes: Vec<String>,
    },

    #[error("SMO did not converge after {passes} passes (KKT gap {gap:.3e}, tolerance {tol:.1e})")]
    NoConvergence { passes: usize, gap: f64, tol: f64 },

    #[error("degenerate marginal: {0}")]
    DegenerateMarginal(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown hyperparameter `{key}` for {algorithm}")]
    UnknownHyperparameter { algorithm: String, key: String },

    #[error("stage `{stage}` requires `{requires}`: {reason}")]
    Dependency {
        stage: String,
        requires: String,
        reason: String,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
