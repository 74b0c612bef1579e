use thiserror::Error;

/// Errors raised by mesh construction, form algebra and the local solves.
#[derive(Debug, Error)]
pub enum FeecError {
    #[error("cell {cell} is degenerate (volume {volume:e})")]
    DegenerateCell { cell: usize, volume: f64 },
    #[error("cell {0} appears more than once")]
    DuplicateCell(usize),
    #[error("inconsistent dimension: {0}")]
    Dimension(String),
    #[error("vertex index {index} out of range ({count} vertices)")]
    VertexOutOfRange { index: usize, count: usize },
    #[error("{op} is undefined for form degree {k}")]
    Degree { op: &'static str, k: usize },
    #[error("matrix is not symmetric positive definite (pivot {pivot}, value {value:e})")]
    NotSpd { pivot: usize, value: f64 },
    #[error("incompatible data: {0}")]
    Incompatible(String),
    #[error("unisolvence failure on face {face:?}: {detail}")]
    Unisolvence { face: Vec<usize>, detail: String },
    #[error("check {id} failed: max error {max_err:e} exceeds tolerance {tol:e}")]
    Check { id: String, max_err: f64, tol: f64 },
    #[error("quadrature degree {needed} exceeds rule degree {available}")]
    QuadratureDegree { needed: usize, available: usize },
    #[error("mesh file: {0}")]
    MeshFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FeecError>;
