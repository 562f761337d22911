use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Core(#[from] blender_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use blender_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 4,
            CliError::Validation(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Core(e) => match e {
                E::InvalidInput(_) | E::Io(_) | E::Json(_) => 4,
                E::GateFailed { .. } | E::InfeasibleInRanges { .. } => 3,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
