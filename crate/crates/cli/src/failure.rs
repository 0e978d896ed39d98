use std::fmt;
use std::process::ExitCode;

/// Distinguishes bad input (exit 2) from a run that went wrong (exit 1).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(msg.to_string())
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        Failure::Runtime(msg.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(2),
            Failure::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

/// Errors in user-supplied settings are usage errors; the rest are runtime.
impl From<episir::Error> for Failure {
    fn from(e: episir::Error) -> Self {
        use episir::Error as E;
        match e {
            E::Config(_) | E::Parse(_) | E::Index { .. } => Failure::usage(e),
            other => Failure::runtime(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::runtime(e)
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Marks a failure while reading an input as a usage error.
pub trait InputContext<T> {
    fn input(self, what: &str) -> CliResult<T>;
}

impl<T, E: fmt::Display> InputContext<T> for Result<T, E> {
    fn input(self, what: &str) -> CliResult<T> {
        self.map_err(|e| Failure::usage(format!("{what}: {e}")))
    }
}
