use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Bad input: malformed files, out-of-range indices, bad arguments.
    #[error("usage error: {0}")]
    Usage(String),
    /// The input is well formed but the requested object does not exist
    /// (inconsistent sample, unrealizable distribution, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A search exceeded its configured budget.
    #[error("resource error: {0}")]
    Resource(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Domain(_) => 1,
            Error::Resource(_) => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Usage(format!("json: {e}"))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Usage(format!("csv: {e}"))
    }
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
