use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] srcsel_core::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// 2 usage or configuration, 3 data validation, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(srcsel_core::Error::Config(_)) => 2,
            CliError::Core(e) if e.is_numerical_error() => 4,
            CliError::Core(_) => 3,
        }
    }
}
