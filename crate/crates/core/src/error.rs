use thiserror::Error;

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Validation,
    Config,
    Infeasible,
    Io,
    Other,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown stop id {0}")]
    UnknownStop(u32),
    #[error("unknown trip id {0}")]
    UnknownTrip(u32),
    #[error("unknown connection id {0}")]
    UnknownConnection(u32),

    #[error("{file}: required file is missing")]
    MissingFile { file: String },
    #[error("{file}: required column `{column}` is missing")]
    MissingColumn { file: String, column: String },
    #[error("{file}:{row}: {msg}")]
    Parse { file: String, row: u64, msg: String },

    #[error("timetable failed validation ({count} violations), first: {first}")]
    Invalid { count: usize, first: String },
    #[error("footpath component of {size} stops exceeds the bound of {bound}")]
    FootpathComponentTooLarge { size: usize, bound: usize },
    #[error("invalid delay feed: {0}")]
    Feed(String),
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("no journey reaches the destination")]
    Unreachable,
    #[error("inconsistent replanning state: {0}")]
    InconsistentState(String),
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("config: {0}")]
    Config(String),
    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MissingFile { .. } | Error::MissingColumn { .. } | Error::Parse { .. } => ErrorKind::Parse,
            Error::Invalid { .. } | Error::FootpathComponentTooLarge { .. } | Error::Feed(_) => ErrorKind::Validation,
            Error::Config(_) | Error::Cache(_) | Error::Param(_) => ErrorKind::Config,
            Error::Unreachable | Error::Infeasible(_) => ErrorKind::Infeasible,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Other,
        }
    }

    pub fn parse(file: &str, row: u64, msg: impl Into<String>) -> Self {
        Error::Parse { file: file.to_string(), row, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
