use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("singular system: {0}")]
    Singular(String),

    /// An iterative solver stopped before meeting its tolerance.
    #[error("{solver} did not converge after {iterations} iterations (violation {violation:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        violation: f64,
        last_iterate: Vec<f64>,
    },

    #[error("simplex iteration cap of {iterations} reached")]
    IterationLimit { iterations: usize, basis: Vec<usize> },

    #[error("linear program is {0}")]
    LpStatus(&'static str),

    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("gradient reconstruction failed at anchor {anchor}: {source}")]
    Anchor {
        anchor: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("epoch {epoch}: {source}")]
    Epoch {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_epoch(self, epoch: usize) -> Self {
        Error::Epoch {
            epoch,
            source: Box::new(self),
        }
    }
}
