use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid latency profile `{name}`: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("circuit is already noise-annotated")]
    AlreadyAnnotated,
    #[error("circuit has no noise annotations")]
    NotAnnotated,
    #[error("unsupported circuit: {0}")]
    UnsupportedCircuit(String),
    #[error("syndrome cannot be matched: {0}")]
    InfeasibleSyndrome(String),
    #[error("invalid patch {0}")]
    InvalidPatch(u32),
    #[error("counter width {width} bits cannot hold a {cycle_ticks}-tick cycle")]
    CounterWidth { width: u32, cycle_ticks: u64 },
    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
