//! Driver for `nehari-core`: configuration files, the field-expression
//! language, and the commands behind the `nehari` binary.

pub mod config;
pub mod expr;
pub mod run;

pub use config::ConfigFile;
pub use run::{exit_code, run, Command, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("expression `{0}`: {1}")]
    Expr(String, String),

    /// The hypothesis gate rejected the problem; carries the full report.
    #[error("hypothesis check failed:\n{0}")]
    ValidationFailed(String),

    #[error(transparent)]
    Core(#[from] nehari_core::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
