use crate::numerics::Vector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix of dimension {dim} is not positive definite (even after jitter)")]
    NotPositiveDefinite { dim: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("coordinate descent hit the sweep cap ({sweeps}) with KKT residual {residual:e}")]
    MaxSweepsExceeded {
        sweeps: usize,
        residual: f64,
        last: Vector,
    },

    #[error("could not bracket the secular equation root within {doublings} doublings")]
    BisectionFailed { doublings: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("block {index}: {source}")]
    Block {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("rho = {rho} must exceed 2H = {bound}")]
    RhoTooSmall { rho: f64, bound: f64 },

    #[error("initial point violates the inequality constraints by {violation:e}")]
    InfeasibleStart { violation: f64 },

    #[error("inconsistent edge: {0}")]
    InconsistentEdge(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_block(self, index: usize) -> Self {
        Error::Block {
            index,
            source: Box::new(self),
        }
    }
}
