use std::fmt;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad or unreadable configuration (exit 2).
    Config(String),
    /// Bad command-line usage (exit 2).
    Usage(String),
    /// A solver, search or simulation failed (exit 1).
    Numerical(ambiport_core::Error),
    /// Output could not be written (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error:\n{m}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ambiport_core::Error> for CliError {
    fn from(e: ambiport_core::Error) -> Self {
        match e {
            ambiport_core::Error::Invalid(r) => CliError::Config(r.to_string()),
            ambiport_core::Error::Parse(m) => CliError::Config(m),
            other => CliError::Numerical(other),
        }
    }
}

impl From<ambiport_core::ValidationReport> for CliError {
    fn from(r: ambiport_core::ValidationReport) -> Self {
        CliError::Config(r.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
