use std::path::{Path, PathBuf};

use heatflow_solver::MilpStatus;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid system:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("data: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("solver stopped with status {} and no feasible solution ({context})", .status.as_str())]
    NoSolution { status: MilpStatus, context: String },
    #[error("bid curve: {0}")]
    BidCurve(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Error {
        Error::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
