use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid root system ({0}, {1}): {2}")]
    InvalidType(String, usize, String),

    #[error("matrix is not of affine type: {0}")]
    NotAffine(String),

    #[error("permutation is not a diagram automorphism: {0}")]
    NotAutomorphism(String),

    #[error("{0} folding is out of scope: {1}")]
    FoldingOutOfScope(String, String),

    #[error("incompatible problem data: {0}")]
    Incompatible(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("solver failed to converge: residual {residual:.3e} after {iterations} iterations")]
    SolverFailure {
        residual: f64,
        iterations: usize,
        /// Sup-norm residual after each accepted step.
        history: Vec<f64>,
    },

    #[error("continuation broke at t = {t}: {source}")]
    ContinuationFailure {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
