use std::path::PathBuf;

use fracdec_core::error::ErrorKind;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_PRECONDITION: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fracdec_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => kind_code(e.kind()),
            _ => EXIT_INVALID,
        }
    }
}

pub fn kind_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::InvalidInput => EXIT_INVALID,
        ErrorKind::Precondition => EXIT_PRECONDITION,
        ErrorKind::Budget => EXIT_BUDGET,
        ErrorKind::Internal => EXIT_INTERNAL,
    }
}

pub type CliResult<T> = Result<T, CliError>;
