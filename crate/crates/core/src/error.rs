use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Evaluation at (or numerically at) the diagonal `r = xi` of a singular kernel.
    #[error("singular evaluation: |r - xi| = {distance:e}")]
    Singularity { distance: f64 },

    #[error("unsupported primitive `{0}` in loss graph")]
    UnsupportedPrimitive(&'static str),

    #[error("point is not on the domain boundary (distance {distance:e})")]
    NotOnBoundary { distance: f64 },

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("model file: {0}")]
    ModelFile(#[from] ModelFileError),

    #[error("config: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("singular linear system (zero pivot at row {0})")]
    SingularSystem(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Failure categories when decoding a persisted model.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelFileError {
    #[error("truncated file ({0})")]
    Truncated(&'static str),

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported format version {found} (this build reads version {expected})")]
    Version { found: u8, expected: u8 },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("parameter payload holds {found} bytes, architecture needs {expected}")]
    Payload { expected: usize, found: usize },
}
