use std::path::{Path, PathBuf};

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Decode(#[from] wind_decode::Error),
}

impl CliError {
    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Loading a user-supplied file: read failures are I/O, content problems are config.
    pub fn loading(path: &Path) -> impl FnOnce(wind_decode::Error) -> CliError + '_ {
        move |err| match err {
            wind_decode::Error::Io(source) => CliError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => CliError::Config(format!("{}: {other}", path.display())),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Config(_) => "config",
            Self::Decode(wind_decode::Error::Io(_)) => "io",
            Self::Decode(_) => "decode",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "io" => 1,
            _ => 2,
        }
    }
}
