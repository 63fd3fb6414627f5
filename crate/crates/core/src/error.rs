use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no past image records available")]
    NoRecords,
    #[error("no frames delivered yet")]
    NoFrames,
    #[error("degenerate viewpoint distance {0} m")]
    DegenerateDistance(f64),
    #[error("empty log")]
    EmptyLog,
    #[error("degenerate ANOVA: error sum of squares is zero")]
    DegenerateAnova,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid course: {0}")]
    InvalidCourse(String),
    #[error("unknown {kind} `{value}`")]
    UnknownName { kind: &'static str, value: String },
    #[error("malformed {what}: {reason}")]
    Parse { what: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse { what: what.into(), reason: reason.into() }
    }
}
