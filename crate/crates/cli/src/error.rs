use std::fmt;
use std::process::ExitCode;

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn internal(e: impl fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<narx_prune::Error> for CliError {
    fn from(e: narx_prune::Error) -> Self {
        use narx_prune::Error as E;
        let msg = e.to_string();
        if e.is_numerical() {
            return CliError::Numerical(msg);
        }
        match e {
            E::InvalidConfig(_) | E::NExceedsCandidates { .. } | E::QExceedsSamples { .. } => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}
