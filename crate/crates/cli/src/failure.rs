use std::fmt;

/// Command failure with its process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, inconsistent sidecar, unsupported combination.
    Config(String),
    /// Distortion budgets that no embedding or attack can meet.
    Infeasible(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Infeasible(m) => write!(f, "infeasible: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<sidemark::Error> for Failure {
    fn from(e: sidemark::Error) -> Self {
        use sidemark::Error as E;
        match e {
            E::Infeasible(_) => Failure::Infeasible(e.to_string()),
            E::Io(_) | E::Pgm { .. } => Failure::Io(e.to_string()),
            E::LengthMismatch { .. } | E::InvalidParameter(_) => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;
