use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("code map error: {0}")]
    CodeMap(String),

    #[error("load error: {0}")]
    Load(String),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("feature engineering error: {0}")]
    Engineering(String),

    #[error("kinematic extraction error: {0}")]
    Kinematics(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("prediction error: {0}")]
    Prediction(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("calibration table error: {0}")]
    Calibration(String),

    #[error("risk classification error: {0}")]
    Classification(String),

    #[error("explanation error: {0}")]
    Explanation(String),

    #[error("consensus error: {0}")]
    Consensus(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("sensitivity error: {0}")]
    Sensitivity(String),

    #[error("ablation error: {0}")]
    Ablation(String),

    #[error("clustering error: {0}")]
    Clustering(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("cross-validation error: {0}")]
    CrossValidation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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

    /// True for errors caused by the input data rather than configuration or
    /// internal failure.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Load(_)
                | Error::MissingColumn(_)
                | Error::Engineering(_)
                | Error::Kinematics(_)
                | Error::Csv(_)
                | Error::ModelFormat(_)
                | Error::Split(_)
        )
    }
}
