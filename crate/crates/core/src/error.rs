use crate::pcg::SolveReport;

/// Errors produced by the matting and color-estimation routines.
#[derive(Debug, thiserror::Error)]
pub enum MattingError {
    #[error("pixel ({x}, {y}) is outside a {width}x{height} image")]
    IndexOutOfRange {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("dimension mismatch: expected {expected_width}x{expected_height}, found {found_width}x{found_height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        found_width: usize,
        found_height: usize,
    },

    #[error("{0}")]
    InvalidInput(String),

    #[error("region {0} is empty")]
    EmptyRegion(&'static str),

    #[error("alpha values are required for color+alpha features but none were given")]
    MissingAlpha,

    #[error("the linear system is singular even after regularization")]
    Singular,

    #[error("conjugate gradients did not converge: {0}")]
    NotConverged(SolveReport),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = MattingError> = std::result::Result<T, E>;
