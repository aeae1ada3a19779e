use thiserror::Error;

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid field `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("numerical breakdown in {context}: {source}")]
    Numerical { context: String, source: vnspec::Error },
}

impl CliError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn from_core(context: &str, e: vnspec::Error) -> Self {
        if e.is_numerical_breakdown() {
            CliError::Numerical {
                context: context.to_string(),
                source: e,
            }
        } else {
            CliError::validation(context, e.to_string())
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical { .. } => EXIT_NUMERICAL,
            _ => EXIT_INVALID,
        }
    }
}
