use moce_core::MoceError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] MoceError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    /// A check the command exists to perform did not hold (gradient check
    /// threshold, property violation, ...). Exits nonzero like any error,
    /// but is reported without an "error:" prefix.
    #[error("{0}")]
    CheckFailed(String),
}
