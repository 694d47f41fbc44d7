//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by grid construction, model fitting, evaluation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("prediction time {t} exceeds the grid horizon {horizon}")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("covariate `{0}` is constant; the partial likelihood carries no information about it")]
    DegenerateCovariate(String),

    #[error("monotone partial likelihood (coefficient {index} exceeded {bound} in magnitude); data are separated")]
    Separation { index: usize, bound: f64 },

    #[error("model has not converged; {0}")]
    InvalidState(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("unsupported model schema version `{found}` (this build reads `{supported}`)")]
    ModelVersion { found: String, supported: String },

    #[error("model file parse error: {0}")]
    ModelParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
