//! `coordmine` command-line pipeline: run config, on-disk artifacts and the
//! subcommands wiring ingest, mining, detection and analysis.

pub mod commands;
pub mod config;
pub mod formats;

use coordmine_core::Error;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum CliError {
    /// Bad or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Missing, unreadable or unusable input data.
    #[error("input error: {0}")]
    Data(String),
    /// A broken internal invariant.
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
            CliError::Core(e) => match e {
                Error::BadConfig(_)
                | Error::InvalidParams(_)
                | Error::BadMapping(_)
                | Error::UnknownAttribute(_) => 2,
                Error::EmptyDataset
                | Error::EmptyWindow(_)
                | Error::NoCommonUsers
                | Error::EmptyInput
                | Error::UnknownUser(_)
                | Error::SingleValuedConflict { .. }
                | Error::Io(_) => 3,
                Error::FrozenDictionary | Error::OracleLimit { .. } | Error::EmptyBehaviour => 4,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
