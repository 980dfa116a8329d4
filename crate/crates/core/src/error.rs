use std::path::PathBuf;

use crate::data::{ItemId, UserId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("unknown user {0}")]
    UnknownUser(UserId),

    #[error("unknown item {0}")]
    UnknownItem(ItemId),

    #[error("duplicate rating for user {user}, item {item}")]
    DuplicateRating { user: UserId, item: ItemId },

    #[error("rating {value} of user {user} for item {item} is outside the rating scale")]
    RatingOutOfDomain { user: UserId, item: ItemId, value: u8 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("user {0} has an empty profile")]
    EmptyProfile(UserId),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("non-finite model parameters")]
    NonFiniteParams,

    #[error("every grid configuration failed to train: {0}")]
    NoViableConfig(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Tags the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidHyperParams(_) => 2,
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::Csv { .. }
            | Error::UnknownUser(_)
            | Error::UnknownItem(_)
            | Error::DuplicateRating { .. }
            | Error::RatingOutOfDomain { .. }
            | Error::InvalidDataset(_)
            | Error::EmptyProfile(_)
            | Error::Json(_) => 3,
            Error::Diverged { .. } | Error::NonFiniteParams | Error::NoViableConfig(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
