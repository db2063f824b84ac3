use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("infeasible deviation for player {player}: constraint {index} = {value:e}")]
    Infeasible { player: usize, index: usize, value: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("degenerate normalization: mean sampled exploitability {0:e}")]
    Degenerate(f64),
    #[error("training aborted at iteration {iteration}: {reason}")]
    Aborted { iteration: usize, reason: String },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
