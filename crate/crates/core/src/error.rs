use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("catalog row {row}, field `{field}`: {reason}")]
    Catalog {
        row: usize,
        field: &'static str,
        reason: String,
    },

    #[error("motor label {0} outside 1..=18")]
    LabelOutOfRange(u32),

    #[error("`{field}` = {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        field: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trajectory is empty")]
    EmptyTrajectory,
}
