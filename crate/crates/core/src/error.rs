use crate::field::ComplexField;

/// Errors produced across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimMismatch { expected: (usize, usize), got: (usize, usize) },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    /// An iterate became non-finite. The last finite iterate is attached.
    #[error("numerical divergence at iteration {iteration}")]
    Divergence { iteration: usize, last_finite: Box<ComplexField> },

    #[error("enhancer bridge error: {0}")]
    Bridge(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dims(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(Error::DimMismatch { expected, got });
    }
    Ok(())
}
