use serde::Serialize;
use thiserror::Error;

/// Failure classes of a run, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(#[from] grazing_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    class: &'a str,
    kind: &'a str,
    exit_code: i32,
    message: String,
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: ErrorBody<'a>,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 1 for configuration and file-system problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn to_json(&self) -> String {
        let (class, kind) = match self {
            CliError::Config(_) => ("config", "InvalidConfig"),
            CliError::Io(_) => ("io", "IoError"),
            CliError::Numerical(e) => ("numerical", e.kind()),
        };
        let doc = ErrorDoc { error: ErrorBody { class, kind, exit_code: self.exit_code(), message: self.to_string() } };
        serde_json::to_string(&doc).expect("error document serialises")
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
