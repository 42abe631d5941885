use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grids have empty overlap in world space")]
    EmptyOverlap,

    #[error("dimension {dim} along slice axis not divisible by factor {factor}")]
    NonDivisible { dim: usize, factor: usize },

    #[error("label id {0} not present in label table")]
    UnknownLabel(u32),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("empty foreground: {0}")]
    EmptyForeground(String),

    #[error("degenerate point set: {0}")]
    DegeneratePoints(String),

    #[error("empty skeleton after pruning")]
    EmptySkeleton,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training failed: {0}")]
    Train(String),

    #[error("statistics: {0}")]
    Stats(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing stage output: {0}")]
    MissingStage(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("NIfTI: {0}")]
    Nifti(#[from] nifti::NiftiError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
