use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hurst parameter {0} outside (0, 1)")]
    HurstOutOfRange(f64),

    #[error("operation requires H < 1/2, got H = {0}")]
    HurstTooLarge(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("time {time} is not a grid point of the {n}-step partition of [0, {horizon}]")]
    Misaligned { time: f64, n: usize, horizon: f64 },

    #[error("step range [{start}, {end}) invalid for a grid with {n} steps")]
    BadRange { start: usize, end: usize, n: usize },

    #[error("covariance not numerically positive definite (N = {size}, H = {h})")]
    CholeskyFailed { size: usize, h: f64 },

    #[error("need at least 2 sub-steps per coarse step, got {0}")]
    TooFewSubsteps(usize),

    #[error("fine grid with {fine} steps does not refine {coarse} coarse steps")]
    IncompatibleGrid { fine: usize, coarse: usize },

    #[error("{ell} levels with H = {h} gives ell*H <= 1/2; pass an explicit override to allow it")]
    UnderCompensated { ell: usize, h: f64 },

    #[error("controlled path has {have} levels, need {need}")]
    InsufficientLevels { have: usize, need: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("truncation index would exceed the cap of {cap}")]
    TruncationCap { cap: u64 },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("drift derivative of order {order} not available (max {max})")]
    MissingDerivative { order: usize, max: usize },

    #[error("derivative check failed: {0}")]
    DerivativeMismatch(String),

    #[error("fundamental solution defect {defect:e} exceeds 1e-6")]
    FundamentalDefect { defect: f64 },

    #[error("paths differ: {0}")]
    PathMismatch(String),

    #[error("W stream index {0} collides with the fBm stream domain")]
    SeedDomain(u64),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
