//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix J_{k} is not skew-symmetric: max |J + J^T| = {residual:.3e} exceeds tolerance {tol:.3e}")]
    NonSkewMatrix { k: usize, residual: f64, tol: f64 },

    #[error("the matrices J_1..J_{d2} are linearly dependent (stacked rank {rank} < {d2})")]
    LinearlyDependentJ { d2: usize, rank: usize },

    #[error("invalid block decomposition: {0}")]
    InvalidBlocks(String),

    #[error("group spec parse error: {0}")]
    Parse(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "eigenvalue clustering is ambiguous: relative gap {gap:.3e} lies in [{lo:.3e}, {hi:.3e}]; \
         retry with a different clustering tolerance"
    )]
    ClusteringAmbiguity { gap: f64, lo: f64, hi: f64 },

    #[error("kernel dimension of J_mu is not constant over directions: {0}")]
    KernelRankNotConstant(String),

    #[error("block decomposition required but absent; supply candidate projections in the group spec")]
    BlocksMissing,

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("sphere covering failed at delta = {delta}: refinement exceeded {limit} centers")]
    CoveringFailure { delta: f64, limit: usize },

    #[error(
        "quadrature too coarse relative to the output grid: max |mu| * u-spacing = {product:.3} > pi; \
         refine the u axes or lower the frequency band"
    )]
    QuadratureTooCoarse { product: f64 },

    #[error("requires dbar1 >= d2 - 1 (got dbar1 = {dbar1}, d2 = {d2})")]
    ExponentCondition { dbar1: i64, d2: i64 },

    #[error("p = {p} is outside the admissible range [{lo}, {hi}]")]
    ExponentRange { p: String, lo: String, hi: String },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
