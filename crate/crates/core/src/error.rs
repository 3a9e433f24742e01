use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A transition density failed validation.
    #[error("model integrity violated at step {h}, state {s}, action {a:?}: {detail}")]
    ModelIntegrity {
        h: usize,
        s: usize,
        a: Vec<f64>,
        detail: String,
    },

    /// Inconsistent configuration (grids, shapes, missing fields).
    #[error("configuration error: {0}")]
    Config(String),

    /// A generator could not produce an object meeting its contract.
    #[error("construction error: {0}")]
    Construction(String),

    /// Every hypothesis assigns zero probability to some observed transition.
    #[error("data/model mismatch: {0}")]
    DataModelMismatch(String),

    /// The elliptical planner ran past its potential-argument bound.
    #[error("elliptical planner exceeded its iteration bound of {bound}")]
    IterationBound { bound: usize },

    /// A stated invariant did not hold on computed values.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors that signal a broken invariant rather than bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::ModelIntegrity { .. } | Error::IterationBound { .. } | Error::Invariant(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
