use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The conditioned proposal never landed inside the ball.
    #[error("lawmu sampler exhausted after {attempts} rejected proposals (scale a = {scale} is too large for ball radius {radius})")]
    LawmuExhausted {
        attempts: usize,
        scale: f64,
        radius: f64,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
