use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid tensor shape {shape:?} for {len} values")]
    Shape { shape: Vec<usize>, len: usize },

    #[error("softmax row {row} has no unmasked position")]
    DegenerateRow { row: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("{what} index {index} out of range (len {len})")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parameter `{0}` has no gradient")]
    UninitializedGradient(String),

    #[error("loss function is not deterministic: {first} vs {second}")]
    NonDeterministic { first: f64, second: f64 },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("referential integrity: {0}")]
    Referential(String),

    #[error("training diverged at epoch {epoch}, batch {batch} (loss {loss})")]
    Divergence {
        epoch: u64,
        batch: usize,
        loss: f64,
    },

    #[error("config hash mismatch: checkpoint has {expected}, current run has {found}")]
    ConfigHashMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
