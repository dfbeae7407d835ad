use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("table has no columns")]
    EmptySchema,
    #[error("masked table modeling needs at least 2 columns, found {found}")]
    TooFewColumns { found: usize },
    #[error("loss became non-finite ({loss}) at step {step}")]
    NonFiniteLoss { step: usize, loss: f64 },
    #[error("shape mismatch for {what}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corpus has no table with at least 2 columns")]
    EmptyCorpus,
    #[error("malformed parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
