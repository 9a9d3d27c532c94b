use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    /// Γ = γ makes the singular line height γ/(2(γ−Γ)) undefined.
    #[error("singular parameters: Γ = γ = {0}")]
    EqualRates(f64),

    #[error("singular feedback undefined at y = 0")]
    FeedbackAtAxis,

    #[error("singular arc already past the axis (radicand {radicand:e})")]
    PastAxis { radicand: f64 },

    #[error("invalid arc order: |y1| = {y1} exceeds |y0| = {y0} or signs differ")]
    InvalidOrder { y0: f64, y1: f64 },

    #[error("no bounded solution: {0}")]
    NoBoundedSolution(String),

    #[error("degenerate start: {0}")]
    DegenerateStart(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown preset `{0}` (expected case1, case2 or south-pole)")]
    UnknownPreset(String),

    #[error("reports are not comparable: {0}")]
    Incomparable(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
