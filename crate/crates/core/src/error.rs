use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("meshes are not nested: coarse n={coarse}, fine n={fine}")]
    NotNested { coarse: usize, fine: usize },

    #[error("field lives on a different mesh (expected n={expected}, got n={got})")]
    MeshMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite field value {value} at ({x}, {y})")]
    NonFinite { value: f64, x: f64, y: f64 },

    #[error("non-finite coefficient {value} at index {index}")]
    NonFiniteCoefficient { index: usize, value: f64 },

    #[error("degenerate triangle {0} (zero area)")]
    DegenerateTriangle(usize),

    #[error("no boundary edges carry tag {0}")]
    EmptyTag(&'static str),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("fixed-point iteration hit max_iter={max_iter}; last step {last_step:e}, last ratio {last_ratio:.4}")]
    FixedPointMaxIter {
        max_iter: usize,
        last_step: f64,
        last_ratio: f64,
    },

    #[error("reduced system too large: {dofs} trace dofs exceeds guard {limit}")]
    ReducedTooLarge { dofs: usize, limit: usize },

    #[error("problem requires alpha (Robin family) but none was given")]
    MissingAlpha,

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
