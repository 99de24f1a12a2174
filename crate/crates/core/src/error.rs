use std::path::PathBuf;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("value {value} is not on the {grid} grid")]
    OffGrid { grid: &'static str, value: f64 },

    #[error("batch of size {0} is too small (need at least 2)")]
    BatchTooSmall(usize),

    #[error("unbalanced discriminator batches: {joint} joint vs {factorized} factorized")]
    Unbalanced { joint: usize, factorized: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at batch {batch}: {detail}")]
    Divergence { batch: usize, detail: String },

    #[error("unknown preset `{given}`; known presets: {known}")]
    UnknownPreset { given: String, known: String },

    #[error("missing column `{column}` in {}", path.display())]
    MissingColumn { column: String, path: PathBuf },

    #[error("empty evaluation window in {}", .0.display())]
    EmptyWindow(PathBuf),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
