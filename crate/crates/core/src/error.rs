use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("entity id {0} out of range")]
    EntityOutOfRange(usize),

    #[error("relation id {0} out of range")]
    RelationOutOfRange(usize),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input data rather than numerics or usage.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::UnknownEntity(_)
                | Error::UnknownRelation(_)
                | Error::EntityOutOfRange(_)
                | Error::RelationOutOfRange(_)
                | Error::Format(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::DimensionMismatch(_)
                | Error::Degenerate(_)
                | Error::InvalidSplit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
