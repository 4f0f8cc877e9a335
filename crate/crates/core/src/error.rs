use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violated a structural invariant. `path` names the field.
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("infinite divergence: model assigns zero probability to a supported outcome ({0})")]
    InfiniteDivergence(String),

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integrity error at line {line}: {message}")]
    Integrity { line: usize, message: String },

    #[error("comparability error: {0}")]
    Comparability(String),

    #[error("malformed answer for `{item}`: {message}")]
    MalformedAnswer { item: String, message: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Training { epoch: usize, loss: f64 },

    #[error("agent failure on `{item}`: {source}")]
    Agent {
        item: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the id of the item or step an agent was answering.
    pub fn for_item(self, item: impl Into<String>) -> Self {
        Error::Agent {
            item: item.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Integrity { .. } | Error::Comparability(_) => 2,
            Error::Transport(_) => 3,
            Error::Agent { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    /// True for errors that should abort a run instead of being recorded per item.
    pub fn is_fatal(&self) -> bool {
        match self {
            Error::Transport(_) | Error::Config(_) | Error::Io { .. } => true,
            Error::Agent { source, .. } => source.is_fatal(),
            _ => false,
        }
    }
}
