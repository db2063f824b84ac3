use std::path::PathBuf;

use pseudeq_core::Error as CoreError;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Bad configuration, dataset or model; exit code 2.
    #[error("validation error: {0}")]
    Validation(String),
    /// Non-finite values or an aborted training run; exit code 3.
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    pub fn validation(msg: impl Into<String>) -> Self {
        HarnessError::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::Io { .. } => 1,
        }
    }
}

impl From<CoreError> for HarnessError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonFinite(_) | CoreError::Aborted { .. } | CoreError::Degenerate(_) => {
                HarnessError::Numerical(e.to_string())
            }
            _ => HarnessError::Validation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Validation(format!("json: {}", e))
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Validation(format!("csv: {}", e))
    }
}
