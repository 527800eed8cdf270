use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact {}: {hint}", path.display())]
    MissingArtifact { path: PathBuf, hint: String },

    #[error(transparent)]
    Core(#[from] morphofilter::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const RUNTIME: i32 = 3;
    pub const MISSING: i32 = 4;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use morphofilter::Error as E;
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::MissingArtifact { .. } => exit::MISSING,
            Self::Core(E::InvalidProblem(_) | E::InvalidParameter { .. } | E::Json(_)) => exit::CONFIG,
            Self::Core(E::MissingReference) => exit::MISSING,
            _ => exit::RUNTIME,
        }
    }

    pub fn missing(path: impl Into<PathBuf>, hint: impl Into<String>) -> Self {
        Self::MissingArtifact {
            path: path.into(),
            hint: hint.into(),
        }
    }
}
