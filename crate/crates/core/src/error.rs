use thiserror::Error;

use crate::model::SplittingError;
use crate::solvers::SolverTrace;
use crate::tensor::Layout;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layout mismatch: expected {expected}, found {found}")]
    LayoutMismatch { expected: Layout, found: Layout },

    #[error("shape {shape:?} does not hold {len} scalars")]
    BadShape { shape: Vec<usize>, len: usize },

    #[error("tuple arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} requires convex functions")]
    NotConvex(&'static str),

    #[error(
        "{0} requires a strongly convex smooth part with a known conjugate; regularize it first"
    )]
    NotStronglyConvex(&'static str),

    #[error("operator carries no tight-frame certificate (A A* = mu Id)")]
    MissingTightFrame,

    #[error("evaluation tape does not belong to this operator graph")]
    StaleTape,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear algebra failure: {0}")]
    LinAlg(String),

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite {
        iteration: usize,
        trace: Box<SolverTrace>,
    },

    #[error(transparent)]
    Splitting(#[from] SplittingError),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
