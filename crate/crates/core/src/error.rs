use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments or data that fail a precondition.
    #[error("input error: {0}")]
    Input(String),

    /// A stage subproblem has no feasible decision (relatively complete recourse violated).
    #[error("stage {stage} infeasible{}", scenario.as_ref().map(|s| format!(" (scenario {s})")).unwrap_or_default())]
    Infeasible {
        stage: usize,
        scenario: Option<String>,
    },

    #[error("problem is unbounded{}", context.as_ref().map(|c| format!(": {c}")).unwrap_or_default())]
    Unbounded { context: Option<String> },

    /// Node/size caps. Carries the best known solution when one exists.
    #[error("resource limit exceeded: {message}")]
    Resource {
        message: String,
        incumbent: Option<f64>,
        bound: Option<f64>,
    },

    #[error("numerical failure in solver: {0}")]
    Solver(String),

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad usage or invalid data rather than a solver outcome.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Input(_) | Error::Io { .. } | Error::Json(_) | Error::Csv(_)
        )
    }
}
