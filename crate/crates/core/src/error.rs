use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid function has {got} values, grid expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("Sobolev order {0} unsupported (k <= 4)")]
    UnsupportedOrder(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eps = {eps} under-resolved: spacing {spacing} exceeds eps/{per_eps}; use at least M = {min_points}")]
    Resolution {
        eps: f64,
        spacing: f64,
        per_eps: f64,
        min_points: usize,
    },

    #[error("non-positive value {value:e} at node {index}")]
    Positivity { index: usize, value: f64 },

    #[error("coefficient {component} = {value} below c0 = {c0} at node {index} (t = {t})")]
    CoefficientBelowBound {
        component: usize,
        index: usize,
        value: f64,
        c0: f64,
        t: f64,
    },

    #[error("box half-width {half_width} too small, need L >= {required}")]
    BoxTooSmall { half_width: f64, required: f64 },

    #[error("invalid mollifier: {0}")]
    Mollifier(String),

    #[error("invalid measure: {0}")]
    Measure(String),

    #[error("linear solve did not converge at step {step}: residual {residual:e} after {iterations} iterations")]
    LinearSolve {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("reference not self-converged: sup-t H1 gap {gap:e} >= {limit:e}")]
    Reference { gap: f64, limit: f64 },

    #[error("invalid eps-grid: {0}")]
    EpsGrid(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed snapshot manifest: {0}")]
    Manifest(String),
}
