use std::path::PathBuf;

/// Errors produced by the inpainting, search and segmentation routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported/corrupt format: {0}")]
    UnsupportedFormat(String),

    #[error("channel mismatch for format: expected {expected} channels, raster has {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("zero-dimension image")]
    ZeroDimension,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("coordinate ({x}, {y}) outside image")]
    OutOfBounds { x: usize, y: usize },

    #[error("candidate not in source region: center ({x}, {y})")]
    CandidateNotInSource { x: usize, y: usize },

    #[error("no admissible exemplar for front pixel ({x}, {y})")]
    NoAdmissibleCandidate { x: usize, y: usize },

    #[error("evolution diverged: non-finite value at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("relaxation did not converge: final residual {residual}")]
    NoConvergence { residual: f64 },

    #[error("empty training set: no known pixels to sample")]
    EmptyTrainingSet,

    #[error("grid of {size} neurons exceeds the 255-layer limit")]
    GridTooLarge { size: usize },

    #[error("no known context: target region covers the whole image")]
    NoKnownContext,
}

pub type Result<T> = std::result::Result<T, Error>;
