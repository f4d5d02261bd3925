use std::path::Path;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] brepnet::DataError),
    #[error(transparent)]
    Model(#[from] brepnet::ModelError),
    #[error(transparent)]
    ModelFile(#[from] brepnet::model::ModelIoError),
    #[error(transparent)]
    Train(#[from] brepnet::train::TrainError),
    #[error(transparent)]
    Metrics(#[from] brepnet::metrics::MetricsError),
    #[error("invalid walk: {0}")]
    Walk(#[from] brepnet::walks::WalkParseError),
    #[error("{0}")]
    Usage(String),
    #[error("gradient check failed: max relative error {max_rel_error:e} >= {tolerance:e}")]
    GradcheckFailed { max_rel_error: f64, tolerance: f64 },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Model(_) => "model",
            CliError::ModelFile(_) => "model_file",
            CliError::Train(_) => "train",
            CliError::Metrics(_) => "metrics",
            CliError::Walk(_) => "walk",
            CliError::Usage(_) => "usage",
            CliError::GradcheckFailed { .. } => "gradcheck_failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    column: Option<usize>,
}

/// One-line JSON error record.
pub fn error_record(err: &CliError) -> String {
    let column = match err {
        CliError::Walk(e) => e.column(),
        _ => None,
    };
    serde_json::to_string(&ErrorRecord { error: ErrorBody { kind: err.kind(), message: err.to_string(), column } })
        .expect("error records serialize")
}
