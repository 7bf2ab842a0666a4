use thiserror::Error;

/// Exit code for command-line usage errors.
pub const EXIT_USAGE: i32 = 64;
/// Exit code for unreadable or invalid configuration.
pub const EXIT_CONFIG: i32 = 65;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] petallab_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use petallab_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(E::InvalidParameter(_) | E::OutsideDomain { .. } | E::Precondition(_)) => {
                EXIT_CONFIG
            }
            CliError::Core(_) => 1,
        }
    }
}
