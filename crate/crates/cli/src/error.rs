use serde::Serialize;
use std::fmt;

/// Failure categories. The kind string is part of the machine-readable error
/// contract; the exit code follows from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    Usage,
    InvalidConfig,
    InputMissing,
    InvalidInput,
    SchemaMismatch,
    EmptyCorpus,
    EmptyInput,
    NumericalFailure,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::NumericalFailure | ErrorKind::Internal => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            path: None,
        }
    }

    pub fn at(mut self, path: impl fmt::Display) -> Self {
        self.path = Some(path.to_string());
        self
    }

    pub fn input(message: impl fmt::Display) -> Self {
        CliError::new(ErrorKind::InvalidInput, message.to_string())
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::InvalidConfig, message)
    }

    pub fn internal(message: impl fmt::Display) -> Self {
        CliError::new(ErrorKind::Internal, message.to_string())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: &'a CliError,
        }
        serde_json::to_string(&Envelope { error: self }).expect("error serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)?;
        if let Some(p) = &self.path {
            write!(f, " ({p})")?;
        }
        Ok(())
    }
}

pub type CliResult<T> = Result<T, CliError>;
