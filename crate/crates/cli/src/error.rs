use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("malformed data: {0}")]
    Malformed(String),
    /// A result that the underlying theory rules out, with the data needed to reproduce it.
    #[error("invariant breach: {message}")]
    Invariant { message: String, dump: Value },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Malformed(_) => 3,
            CliError::Invariant { .. } => 4,
        }
    }
}
