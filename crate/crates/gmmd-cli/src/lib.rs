//! Library backing the `gmmd` command-line tool: CSV ingestion, the scenario
//! file format, and the subcommand implementations. Kept as a library so the
//! command logic is directly testable.

pub mod commands;
pub mod csv;
pub mod scenario;

use serde::Serialize;
use thiserror::Error;

/// Exit-code contract: 0 = completed, 2 = invalid input or degenerate data,
/// 1 = internal failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Internal(_) => "internal",
        }
    }

    /// Machine-readable error payload for standard error.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct ErrorBody<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct ErrorReport<'a> {
            schema_version: u32,
            error: ErrorBody<'a>,
        }
        serde_json::to_string(&ErrorReport {
            schema_version: 1,
            error: ErrorBody {
                kind: self.kind(),
                message: self.to_string(),
            },
        })
        .expect("error serialization cannot fail")
    }
}

impl From<gmmd::Error> for CliError {
    fn from(e: gmmd::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Write `contents` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn atomic_write(path: &std::path::Path, contents: &str) -> CliResult<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, contents)
        .map_err(|e| CliError::Internal(format!("write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        std::fs::remove_file(&tmp).ok();
        CliError::Internal(format!("rename to {}: {e}", path.display()))
    })
}
