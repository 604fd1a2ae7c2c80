use thiserror::Error;

/// Command failures, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Missing or malformed input files, or outputs that already exist.
    #[error("{0}")]
    Input(String),
    /// Training diverged.
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Config(_) => 4,
        }
    }
}

impl From<dmem_core::Error> for CliError {
    fn from(e: dmem_core::Error) -> Self {
        use dmem_core::Error as E;
        let msg = e.to_string();
        match e {
            E::NonFiniteLoss { .. } => CliError::Numeric(msg),
            E::Config(m) => CliError::Config(m),
            E::InvalidArgument(_) => CliError::Config(msg),
            E::Io { .. }
            | E::Format { .. }
            | E::SizeMismatch { .. }
            | E::NonFinitePayload(_)
            | E::DimensionMismatch(_)
            | E::NotEnoughSamples { .. } => CliError::Input(msg),
        }
    }
}
