use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("trajectory {trajectory_id}: {message}")]
    Projection { trajectory_id: String, message: String },

    #[error("degenerate normalization axis `{axis}`: min = max = {value}")]
    DegenerateAxis { axis: &'static str, value: f64 },

    #[error("duplicate knot abscissa at index {index}")]
    DuplicateKnot { index: usize },

    #[error("temporal knots decrease at index {index}: {previous} > {value}")]
    DecreasingKnots { index: usize, previous: f64, value: f64 },

    #[error("trajectory {id}: {source}")]
    Trajectory {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("curve {id}: {source}")]
    Curve {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True when the failure stems from the data or the math rather than from
    /// malformed input or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::DegenerateAxis { .. } => true,
            Error::Trajectory { source, .. } | Error::Curve { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
