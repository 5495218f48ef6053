use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid generator count {0}")]
    InvalidContext(usize),

    #[error("form context mismatch: {0} vs {1} generators")]
    ContextMismatch(usize, usize),

    #[error("degree {degree} out of range 0..={p}")]
    DegreeOutOfRange { degree: usize, p: usize },

    #[error("graded space mismatch")]
    SpaceMismatch,

    #[error("invalid graded ranks: {0}")]
    InvalidRanks(String),

    #[error("element is not even")]
    NotEven,

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("differential does not square to zero (|v²| = {0:.3e})")]
    NotNilpotent(f64),

    #[error("metric is not positive definite at x = {x:?} (min eigenvalue {min_eig:.3e})")]
    IndefiniteMetric { x: Vec<f64>, min_eig: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("negative scale u = {0}")]
    NegativeScale(f64),

    #[error("complex is not acyclic (min eigenvalue of the Laplacian {0:.3e})")]
    NotAcyclic(f64),

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("fit residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    FitResidual { residual: f64, tol: f64 },

    #[error("operator dimension {dim} exceeds cap {cap}; largest admissible grid is N = {suggested_n}")]
    DimensionCap {
        dim: usize,
        cap: usize,
        suggested_n: usize,
    },

    #[error("spectrum too close to zero: {0}")]
    Spectrum(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
