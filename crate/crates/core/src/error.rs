use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("moment count must be even and at least 2, got {0}")]
    InvalidMomentCount(usize),

    #[error("measure needs the same nonzero number of nodes and weights (got {nodes} and {weights})")]
    MeasureShape { nodes: usize, weights: usize },

    #[error("nodes {0} and {1} coincide")]
    DuplicateNodes(usize, usize),

    #[error("noise level must be finite and {expected}, got {value}")]
    InvalidSigma { value: f64, expected: &'static str },

    #[error("singular pencil (reciprocal condition {0:e})")]
    SingularPencil(f64),

    #[error("ill-conditioned Vandermonde system (reciprocal condition {0:e})")]
    IllConditionedVandermonde(f64),

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("grid has {got} values, lattice expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("pseudosample {index} still failing after {retries} retries: {last}")]
    PseudosampleExhausted {
        index: usize,
        retries: usize,
        last: Box<Error>,
    },

    #[error("disk {index} (radius {radius}) is not inside the lattice interior")]
    DiskOutsideLattice { index: usize, radius: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
