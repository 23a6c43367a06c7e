use thiserror::Error;

use crate::denoisers::WeightsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// A sample that cannot be normalized or scored (all-zero channel, zero row).
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("degenerate source matrix: {0}")]
    RankDeficient(String),

    #[error("solver diverged at iteration {iteration}: non-finite iterate")]
    Divergence { iteration: usize },

    #[error(transparent)]
    Weights(#[from] WeightsError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::InvalidShape(msg.into())
    }
}
