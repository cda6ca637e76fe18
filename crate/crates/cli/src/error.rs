use std::path::PathBuf;

use thiserror::Error;

use stripmask_core::Error as CoreError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } => EXIT_CONFIG,
            CliError::Core(e) if e.is_model_failure() => EXIT_MODEL,
            CliError::Core(CoreError::Io { .. } | CoreError::Format { .. }) => EXIT_IO,
            CliError::Core(_) => EXIT_CONFIG,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;
    use stripmask_core::adapter::ProtocolError;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::config("x").exit_code(), 2);
        assert_eq!(CliError::from(CoreError::Config("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(CoreError::Model("x".into())).exit_code(), 3);
        let proto = CoreError::Protocol(ProtocolError::ChildExited("gone".into()));
        assert_eq!(CliError::from(proto).exit_code(), 3);
        let run = CoreError::Run {
            source: Box::new(CoreError::Model("x".into())),
            history: vec![1.0],
        };
        assert_eq!(CliError::from(run).exit_code(), 3);
        let io = CoreError::Io {
            path: "a".into(),
            source: std::io::Error::other("boom"),
        };
        assert_eq!(CliError::from(io).exit_code(), 4);
    }
}
