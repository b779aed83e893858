use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field does not match grid: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("field is not zero on the boundary (max |f| = {max_abs:.3e})")]
    NonzeroBoundary { max_abs: f64 },

    #[error("linear solver did not converge: {iterations} iterations, relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("incompatible Neumann data: |∫f − ∮g| = {mismatch:.3e} exceeds {tolerance:.3e}")]
    IncompatibleData { mismatch: f64, tolerance: f64 },

    #[error("consistency check failed: {0}")]
    ConsistencyViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field is identically zero")]
    ZeroField,

    #[error("retraction direction is degenerate (Gram condition {condition:.3e})")]
    DegenerateDirection { condition: f64 },

    #[error("retraction Newton iteration diverged (residual {residual:.3e})")]
    NewtonDivergence { residual: f64 },

    #[error("constraint differentials are linearly dependent (Gram condition {condition:.3e})")]
    DegenerateConstraints { condition: f64 },

    #[error("cannot bracket alpha inside the region: {0}")]
    InfeasibleRegion(String),

    #[error("slab {0} cannot host a feasible seed")]
    SlabInfeasible(usize),

    #[error("line search stalled at step {step:.3e}")]
    LineSearchStall { step: f64 },

    #[error("multiplier system is singular (∫q²u² − α² = {gap:.3e})")]
    SingularMultiplierSystem { gap: f64 },

    #[error("dense oracle limited to {max_nodes} nodes, grid has {nodes}")]
    OracleTooLarge { nodes: usize, max_nodes: usize },

    #[error("config error at key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
