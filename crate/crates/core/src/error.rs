use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("inadmissible state in element {element}, node {node}: {reason}")]
    Admissibility {
        element: usize,
        node: usize,
        reason: &'static str,
    },

    #[error("RK stage {stage} at t={time}: {source}")]
    StepFailure {
        stage: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot restrict element {element} from degree {from:?} to {to:?}")]
    InvalidRestriction {
        element: usize,
        from: [usize; 2],
        to: [usize; 2],
    },

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("signal error: {0}")]
    Signal(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Location of an admissibility failure, looking through step wrappers.
    pub fn admissibility_location(&self) -> Option<(usize, usize)> {
        match self {
            Error::Admissibility { element, node, .. } => Some((*element, *node)),
            Error::StepFailure { source, .. } => source.admissibility_location(),
            _ => None,
        }
    }
}
