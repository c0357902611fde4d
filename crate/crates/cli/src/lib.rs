//! Command-line pipeline for the differential prototypes network: synthesize
//! cohorts, train, validate, cluster and interpret.

pub mod args;
mod commands;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;
use dpnn_core::Error;

pub use args::Cli;
pub use output::{Outputs, Provenance};

/// Environment variable naming the fallback directory for relative config paths.
pub const CONFIG_DIR_ENV: &str = "DPNN_CONFIG_DIR";

pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const INPUT: i32 = 4;
    pub const NUMERIC: i32 = 5;
    pub const DOMAIN: i32 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Core { context: String, source: Error },

    #[error("{0}")]
    Input(String),

    #[error("cannot write `{}`: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<Error> for CliError {
    fn from(source: Error) -> Self {
        CliError::Core {
            context: "error".into(),
            source,
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Output { .. } => exit::IO,
            CliError::Input(_) => exit::INPUT,
            CliError::Json(_) => exit::OTHER,
            CliError::Core { source, .. } => match source {
                Error::Io(_) => exit::IO,
                Error::Parse { .. }
                | Error::Validation(_)
                | Error::Format(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Shape(_) => exit::INPUT,
                Error::NonFinite { .. }
                | Error::Diverged { .. }
                | Error::DegenerateRange { .. } => exit::NUMERIC,
                Error::Domain(_)
                | Error::UndefinedMetric(_)
                | Error::UnknownStudy(_)
                | Error::AllMissing(_) => exit::DOMAIN,
            },
        }
    }
}

/// Attaches a description of the failing step to core errors.
pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for dpnn_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: what(),
            source,
        })
    }
}

/// Executes a parsed command and writes its outputs.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let outputs = commands::dispatch(&cli.command)?;
    let paths = outputs.paths().map(PathBuf::from).collect();
    outputs.commit()?;
    Ok(paths)
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(_) => exit::OK,
        Err(e) => {
            eprintln!("dpnn: {e}");
            e.exit_code()
        }
    }
}
