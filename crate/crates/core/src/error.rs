use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {0:?} lies on the singularity set")]
    SingularPoint(Vec<f64>),

    #[error("point {0:?} is outside the open unit cube")]
    OutOfDomain(Vec<f64>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid map definition: {0}")]
    InvalidMap(String),

    #[error("unknown map `{name}`; available: {available}")]
    UnknownMap { name: String, available: String },

    #[error("parameter {name}={value} rejected: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid functions live on different grids")]
    GridMismatch,

    #[error("mollification scale {delta} is below the grid limit {min}")]
    DeltaTooSmall { delta: f64, min: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("invariant density iteration stopped after {iterations} steps (L1 change {residual:e})")]
    DensityNotConverged {
        iterations: usize,
        residual: f64,
        /// The last iterate, kept so callers can still write it out.
        last: Box<crate::grid_bv::GridFunction>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("nonnegative recombination of the unit eigenspace failed (condition {condition:e})")]
    DecompositionAmbiguous { condition: f64 },

    #[error("line/piece intersection failed to bracket near {0}")]
    IntervalEnumerationIncomplete(f64),

    #[error("no ball passes the density floor (best min {best_min:e} at cell {best_cell})")]
    NoPositiveBall { best_min: f64, best_cell: usize },

    #[error("malformed data: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
