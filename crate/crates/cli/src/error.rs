use std::fmt;
use std::path::{Path, PathBuf};

use slidewin::Error;

/// Failure of a subcommand, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or unreadable input.
    Input {
        path: PathBuf,
        source: Error,
    },
    /// Configuration or scenario that does not validate.
    Config(String),
    /// Track and ground-truth files describe different scenes.
    SceneMismatch(String),
    /// Output could not be written.
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    Tracker(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input { .. } => 2,
            CliError::Config(_) => 3,
            CliError::SceneMismatch(_) => 4,
            CliError::Output { .. } => 5,
            CliError::Tracker(_) => 1,
        }
    }

    pub fn input(path: &Path, source: impl Into<Error>) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            source: source.into(),
        }
    }

    pub fn output(path: &Path, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::SceneMismatch(m) => write!(f, "scene mismatch: {m}"),
            CliError::Output { path, source } => {
                write!(f, "cannot write {}: {source}", path.display())
            }
            CliError::Tracker(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(v) => CliError::Config(
                v.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("\n  "),
            ),
            other => CliError::Tracker(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
