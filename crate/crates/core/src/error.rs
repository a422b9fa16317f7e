use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("expected {expected} components, found {found}")]
    ComponentMismatch { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("component {component} has nonzero mean {mean:e}; input must be mean-zero")]
    NotMeanZero { component: usize, mean: f64 },
    #[error("invalid index: {0}")]
    InvalidIndex(String),
    #[error("empty time series")]
    EmptySeries,
    #[error("time grid mismatch: {0}")]
    TimeGridMismatch(String),
    #[error("hypothesis of {lemma} violated: {condition}")]
    Hypothesis { lemma: String, condition: String },
    #[error("CFL violation at dt = {dt}: backward displacement {cells:.3} cells exceeds {limit} cells")]
    Cfl { dt: f64, cells: f64, limit: f64 },
    #[error("{what}: inner sweeps diverged (residual {residual:e} after {sweeps} sweeps)")]
    InnerDivergence { what: &'static str, sweeps: usize, residual: f64 },
    #[error("Neumann series unavailable: spectral-radius proxy {rho} >= 1")]
    NeumannDivergent { rho: f64 },
    #[error("director is off the sphere: max | |d| - 1 | = {0:e}")]
    OffSphere(f64),
    #[error("incompatible data: {0}")]
    Incompatible(String),
    #[error("non-dyadic scaling: {0}")]
    NonDyadic(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
