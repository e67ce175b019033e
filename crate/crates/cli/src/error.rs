use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(amspace::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<amspace::Error> for CliError {
    /// Errors caused by the inputs are configuration errors; the rest are
    /// numerical failures.
    fn from(e: amspace::Error) -> Self {
        use amspace::Error as E;
        match e {
            E::InvalidGrid
            | E::NonFinite { .. }
            | E::BoundaryViolation { .. }
            | E::GridMismatch(_)
            | E::OutOfDomain(_)
            | E::NegativeTime(_)
            | E::LambdaOutOfRange { .. }
            | E::InvalidConfig(_)
            | E::TimeOutOfRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e),
        }
    }
}
