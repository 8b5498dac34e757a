use std::path::PathBuf;

use crate::date::YearMonth;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{file}: missing column `{column}`")]
    Schema { file: PathBuf, column: String },

    #[error("{context}: row {row}: {message}")]
    DataRow {
        context: String,
        row: usize,
        message: String,
    },

    #[error("{context}: {message} at {date}")]
    DataDate {
        context: String,
        date: YearMonth,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("invalid indicator spec: {0}")]
    IndicatorSpec(String),

    #[error("batch normalization needs at least 2 rows per training batch, got {0}")]
    DegenerateBatch(usize),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("benchmark squared error sum is zero")]
    DegenerateBenchmark,

    #[error("total sum of squares is zero")]
    ZeroVariance,

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("exact Shapley enumeration supports at most {max} features, got {p}; use the sampled estimator")]
    TooManyFeatures { p: usize, max: usize },

    #[error("kernel SHAP system is singular; increase the number of coalitions (got {0})")]
    SingularShapSystem(usize),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
