use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: truncation needs at least {min} basis states")]
    InvalidDimension { dim: usize, min: usize },

    #[error("index {index} out of range for dimension {dim}")]
    Index { index: usize, dim: usize },

    #[error("shape mismatch: expected dimension {expected}, got {found}")]
    Shape { expected: usize, found: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("step failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error(
        "truncation breach at t = {t}: population {population:.3e} in the top basis decile \
         exceeds {threshold:.1e} (raise dim or lower dt)"
    )]
    TruncationBreach { t: f64, population: f64, threshold: f64 },

    #[error("integration diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("no trajectory record within {tolerance:.3e} of strobe time {strobe:.6} (n = {n})")]
    SectionGap { n: u64, strobe: f64, tolerance: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation { field, reason: reason.into() }
    }

    /// Strips any `Trajectory` wrapping, returning the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Trajectory { source, .. } => source.root(),
            other => other,
        }
    }
}
