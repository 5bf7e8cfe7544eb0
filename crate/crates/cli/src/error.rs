use std::path::PathBuf;

use thiserror::Error;

/// Exit code for success.
pub const EXIT_OK: i32 = 0;
/// Exit code when a checked condition or guarantee fails.
pub const EXIT_CONDITION: i32 = 1;
/// Exit code for usage, configuration and parse errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: clustersync::Error,
    },

    #[error(transparent)]
    Core(#[from] clustersync::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable mapping onto the process exit codes.
    pub fn exit_code(&self) -> i32 {
        use clustersync::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Input { .. } => EXIT_USAGE,
            CliError::Core(e) => match e {
                E::Parse { .. }
                | E::InvalidGraph(_)
                | E::InvalidParameter(_)
                | E::Dimension(_)
                | E::IndexOutOfRange { .. }
                | E::WeightOnNonEdge(..)
                | E::MissingWeight(..) => EXIT_USAGE,
                _ => EXIT_CONDITION,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
