use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("softmax row {row} has no finite entry (query sees no key)")]
    AllMasked { row: usize },

    #[error("backward called on a value that is not a scalar on the active trace")]
    NoTrace,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("symbol {symbol} is not in the alphabet of {task}")]
    UnknownSymbol { task: String, symbol: String },

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("invalid {field}: {msg}")]
    Config { field: &'static str, msg: String },

    #[error("sequence length {len} needs {needed} depth groups, more than max_groups = {max}")]
    DepthExceeded { len: usize, needed: usize, max: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged at step {step} (loss = {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn config(field: &'static str, msg: impl Into<String>) -> Self {
        Error::Config {
            field,
            msg: msg.into(),
        }
    }
}
