use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, ordering, state).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("goal unreachable from ({x:.3}, {y:.3}) after {expanded} expansions")]
    Unreachable { x: f64, y: f64, expanded: usize },

    #[error("invalid configuration: `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("cannot sample a batch from an empty training set")]
    EmptyBatch,

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("feedback session aborted: {0}")]
    SessionAborted(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}
