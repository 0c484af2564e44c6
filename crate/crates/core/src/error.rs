use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("axis {axis}: point count {npoints} must be a power of two and at least 8")]
    BadPointCount { axis: usize, npoints: usize },
    #[error("axis {axis}: extent [{min}, {max}) has zero or negative width")]
    ZeroWidth { axis: usize, min: f64, max: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field has zero norm")]
    ZeroNorm,
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),
    #[error("state recipe leaks outside the grid margin: {0}")]
    MarginViolation(String),
    #[error("invalid state recipe: {0}")]
    InvalidRecipe(String),
    #[error("norm drift {drift:.3e} at step {step} exceeds {limit:.1e}; time step too large")]
    NormDrift { step: usize, drift: f64, limit: f64 },
    #[error("non-finite amplitude after step {step}")]
    NonFinite { step: usize },
    #[error("index {index} out of range (valid {min}..={max})")]
    IndexOutOfRange { index: usize, min: usize, max: usize },
    #[error("initial configuration {point:?} lies on a node (rho = {rho:.3e})")]
    NodeStart { point: Vec<f64>, rho: f64 },
    #[error("trajectory left the grid at t = {time} (position {point:?})")]
    LeftGrid { time: f64, point: Vec<f64> },
    #[error("time {time} outside the stored span [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("map is not invertible and no preimage routine was supplied")]
    NonInvertible,
    #[error("measurement setup: {0}")]
    Measurement(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("loop passes through masked (nodal) cells near {0:?}")]
    LoopOnNode(Vec<f64>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
