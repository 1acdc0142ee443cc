use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] anosov_core::Error),
}

impl CliError {
    /// Every error here is an input or environment problem.
    pub fn exit_code(&self) -> i32 {
        1
    }
}
