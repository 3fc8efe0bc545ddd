use std::path::PathBuf;

use arthromap::Error as CoreError;
use serde::Serialize;

/// Failure classes with stable exit codes; `2` is reserved for usage errors.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    MissingFile(PathBuf),
    Core(CoreError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::MissingFile(_) => "missing_file",
            CliError::Core(e) => match e {
                CoreError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "missing_file",
                CoreError::Io { .. } => "io",
                CoreError::Format { .. } => "format",
                CoreError::DimensionMismatch(_) => "dimension_mismatch",
                CoreError::LengthMismatch { .. } | CoreError::TimestampMismatch { .. } => "length_mismatch",
                CoreError::DegenerateDepth(_) => "degenerate_depth",
                _ => "invalid_input",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "usage" => 2,
            "config" => 3,
            "missing_file" => 4,
            "io" => 5,
            "format" => 6,
            "dimension_mismatch" => 7,
            "length_mismatch" => 8,
            "degenerate_depth" => 9,
            _ => 10,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Config(m) => m.clone(),
            CliError::MissingFile(p) => format!("file not found: {}", p.display()),
            CliError::Core(e) => e.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&Report {
            error: self.code(),
            message: self.message(),
        })
        .expect("plain struct serializes")
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
