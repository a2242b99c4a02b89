use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("name `{0}` is empty or contains whitespace")]
    BadName(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("row `{0}` references an unknown variable")]
    UnknownVariable(String),
    #[error("row `{0}` has no provenance tag")]
    MissingTag(String),
}

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

impl MpsError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        MpsError::Parse {
            line,
            message: message.into(),
        }
    }
}
