//! Exit codes. On failure the binary prints one JSON object on stderr:
//! `{"error": "<code>", "exit": <n>, "detail": "..."}`.
//!
//! | exit | code             | meaning                                        |
//! |------|------------------|------------------------------------------------|
//! | 0    |                  | success                                        |
//! | 2    | `usage`          | bad command line (reported by clap)            |
//! | 3    | `config_invalid` | run, simulation, prompt or instrument config   |
//! | 4    | `input_invalid`  | unreadable log or table, schema drift, replay  |
//! | 5    | `analysis_failed`| an analysis could not run on the given data    |
//! | 6    | `output_failed`  | an artifact could not be written               |
//! | 7    | `serve_failed`   | a listener could not be bound or crashed       |

use serde::Serialize;
use thiserror::Error;

use parley_analysis::report::AnalyzeError;
use parley_core::surveys::InstrumentError;
use parley_core::tables::TableError;
use parley_service::events::LogReadError;
use parley_service::export::ExportError;
use parley_service::sim::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Usage,
    ConfigInvalid,
    InputInvalid,
    AnalysisFailed,
    OutputFailed,
    ServeFailed,
}

impl ErrorCode {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorCode::Usage => 2,
            ErrorCode::ConfigInvalid => 3,
            ErrorCode::InputInvalid => 4,
            ErrorCode::AnalysisFailed => 5,
            ErrorCode::OutputFailed => 6,
            ErrorCode::ServeFailed => 7,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error("{path}: {source}")]
    Log {
        path: String,
        #[source]
        source: LogReadError,
    },
    #[error("{path}: {source}")]
    Table {
        path: String,
        #[source]
        source: TableError,
    },
    #[error("export: {0}")]
    Export(#[from] ExportError),
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    #[error("writing {path}: {detail}")]
    Output { path: String, detail: String },
    #[error("serve: {0}")]
    Serve(String),
}

impl CliError {
    pub fn code(&self) -> ErrorCode {
        match self {
            CliError::Config(_) | CliError::Sim(_) | CliError::Instrument(_) => ErrorCode::ConfigInvalid,
            CliError::Log { .. } | CliError::Table { .. } => ErrorCode::InputInvalid,
            CliError::Export(ExportError::Io(_)) => ErrorCode::OutputFailed,
            CliError::Export(ExportError::Table(TableError::Io(_))) => ErrorCode::OutputFailed,
            CliError::Export(_) => ErrorCode::InputInvalid,
            CliError::Analyze(AnalyzeError::Io(_) | AnalyzeError::Table(_) | AnalyzeError::Json(_)) => {
                ErrorCode::OutputFailed
            }
            CliError::Analyze(_) => ErrorCode::AnalysisFailed,
            CliError::Output { .. } => ErrorCode::OutputFailed,
            CliError::Serve(_) => ErrorCode::ServeFailed,
        }
    }

    pub fn output(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.display().to_string(),
            detail: e.to_string(),
        }
    }

    /// The single-line JSON report printed on stderr.
    pub fn report(&self) -> String {
        let code = self.code();
        serde_json::json!({
            "error": code,
            "exit": code.exit_code(),
            "detail": self.to_string(),
        })
        .to_string()
    }
}
