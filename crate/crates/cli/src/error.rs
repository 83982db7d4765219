use std::fmt;
use std::path::Path;

use dialoforge::corpus::CorpusError;

/// Exit status 1 for usage and validation errors, 2 for I/O errors.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invalid(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn corpus(path: &Path, e: CorpusError) -> Self {
        let msg = format!("{}: {e}", path.display());
        if e.is_io() {
            CliError::Io(msg)
        } else {
            CliError::Invalid(msg)
        }
    }

    pub fn invalid(e: impl fmt::Display) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Invalid(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}
