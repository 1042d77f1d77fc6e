use std::fmt;
use std::process::ExitCode;

/// Exit classes: 1 usage, 2 data, 3 runtime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    Usage,
    Data,
    Runtime,
}

impl Failure {
    pub fn exit_code(self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage => 1,
            Self::Data => 2,
            Self::Runtime => 3,
        })
    }
}

pub struct CliError {
    pub failure: Failure,
    pub error: anyhow::Error,
}

impl fmt::Debug for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {:#}", self.failure, self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Classify<T> {
    fn usage(self) -> CliResult<T>;
    fn data(self) -> CliResult<T>;
    fn runtime(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> CliResult<T> {
        self.map_err(|e| CliError {
            failure: Failure::Usage,
            error: e.into(),
        })
    }

    fn data(self) -> CliResult<T> {
        self.map_err(|e| CliError {
            failure: Failure::Data,
            error: e.into(),
        })
    }

    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| CliError {
            failure: Failure::Runtime,
            error: e.into(),
        })
    }
}

pub fn fail<T>(failure: Failure, message: impl Into<String>) -> CliResult<T> {
    Err(CliError {
        failure,
        error: anyhow::anyhow!(message.into()),
    })
}
