use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no particles")]
    NoParticles,

    #[error("no successor layer after layer {layer}")]
    NoSuccessorLayer { layer: usize },

    #[error("{what} index {index} out of range (size {size})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("expected {expected} per-agent entries, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("invalid distribution in {context}: {reason}")]
    InvalidDistribution { context: String, reason: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown domain `{0}`")]
    UnknownDomain(String),

    #[error("explicit model required: {0}")]
    ModelRequired(&'static str),

    #[error("exact computation budget exceeded: needs {needed} cells, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("malformed policy document: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_index(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index < size {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, index, size })
    }
}

pub(crate) fn check_arity(got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::Arity { expected, got })
    }
}
