use std::fmt::Display;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{operation} failed ({inputs}): {source}")]
    Numerical {
        operation: &'static str,
        inputs: String,
        #[source]
        source: fracpoly::Error,
    },

    #[error("{failed} of {total} validation checks failed")]
    Validation { failed: usize, total: usize },

    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn config(key: &str, message: impl Display) -> Self {
        let key = if key.is_empty() { "<root>" } else { key };
        CliError::Config { key: key.to_string(), message: message.to_string() }
    }

    pub fn numerical(operation: &'static str, inputs: impl Into<String>, source: fracpoly::Error) -> Self {
        CliError::Numerical { operation, inputs: inputs.into(), source }
    }

    /// 1 config, 2 numerical, 3 validation failure. Output errors count as config errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Output { .. } => 1,
            CliError::Numerical { .. } => 2,
            CliError::Validation { .. } => 3,
        }
    }
}
