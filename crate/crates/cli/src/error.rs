use std::fmt;
use std::path::Path;

use robomorph::compiler::Corruption;
use robomorph::evolution::EvolutionError;
use robomorph::generator::GeneratorError;

pub const EXIT_CORRUPTED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GENERATOR: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// A failure carrying the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    pub fn corrupted(c: &Corruption) -> Self {
        CliError {
            code: EXIT_CORRUPTED,
            message: format!("corrupted design ({c})"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<GeneratorError> for CliError {
    fn from(e: GeneratorError) -> Self {
        match e {
            GeneratorError::MissingApiKey(var) => {
                CliError::config(format!("remote backend needs the API key in ${var}"))
            }
            e => CliError {
                code: EXIT_GENERATOR,
                message: e.to_string(),
            },
        }
    }
}

impl From<EvolutionError> for CliError {
    fn from(e: EvolutionError) -> Self {
        let code = match &e {
            EvolutionError::InvalidConfig(_) | EvolutionError::RetryExhausted { .. } => EXIT_CONFIG,
            EvolutionError::GeneratorUnavailable { .. } => EXIT_GENERATOR,
            EvolutionError::Sink(_) | EvolutionError::Resume(_) => EXIT_IO,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}
