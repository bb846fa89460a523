use thiserror::Error;

/// Errors raised across the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{field}` violates {constraint}")]
    RangeViolation {
        field: &'static str,
        constraint: &'static str,
    },
    #[error("initial data has zero mass")]
    EmptyMass,
    #[error("initial sample {value} at x={x} exceeds the bound M={bound}")]
    BoundViolation { x: f64, value: f64, bound: f64 },
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("invalid initial data: {0}")]
    InvalidInitial(String),
    #[error("data must be strictly positive (found {value} at x={x})")]
    NonpositiveData { x: f64, value: f64 },
    #[error("corridor requires 0 < delta < m_bar (got delta={delta}, m_bar={m_bar})")]
    InvalidCorridor { delta: f64, m_bar: f64 },
    #[error("mollification width delta={0} outside (0, 1/12)")]
    DeltaOutOfRange(f64),
    #[error("corridor schedule diverged after {expansions} expansions at t={time}")]
    ScheduleDiverged { expansions: usize, time: f64 },
    #[error("Newton failed at t={time} with dt={dt} (residual {residual:e})")]
    NewtonDiverged { time: f64, dt: f64, residual: f64 },
    #[error("non-finite state at t={0}")]
    NonFiniteState(f64),
    #[error("mass {mass} fell below half the initial mean {half_mean} at t={time}")]
    MassCollapse {
        time: f64,
        mass: f64,
        half_mean: f64,
    },
    #[error("explicit step dt={dt} exceeds stability limit {limit}")]
    StabilityViolation { dt: f64, limit: f64 },
    #[error("fields live on different grids ({0} vs {1} nodes)")]
    GridMismatch(usize, usize),
    #[error("solution minimum on [t*, T] is not positive ({0})")]
    XiNonpositive(f64),
    #[error("invalid step configuration: {0}")]
    InvalidStepConfig(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
