use thiserror::Error;

/// Errors raised by scene validation, solvers and analyses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported dimension {0}")]
    InvalidDimension(usize),
    #[error("point is not on the boundary (distance {distance:e})")]
    NotOnBoundary { distance: f64 },
    #[error("parallel surface at offset {offset} is empty")]
    EmptySurface { offset: f64 },
    #[error("ball is not tangent to the boundary: {0}")]
    NotTangent(String),
    #[error("radius {radius} is not below the admissible bound {bound}")]
    RadiusTooLarge { radius: f64, bound: f64 },
    #[error("ball leaves the admissible region: {0}")]
    BallOutside(String),
    #[error("scene is not concentric")]
    NotConcentric,
    #[error("under-resolved: {0}")]
    UnderResolved(String),
    #[error("query (r = {r}, t = {t}) lies outside the solution hull")]
    OutOfHull { r: f64, t: f64 },
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
    #[error("conjugate gradients stalled after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("truncation sensitivity {sensitivity:e} exceeds tolerance {tolerance:e}")]
    TruncationSensitivity { sensitivity: f64, tolerance: f64 },
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("time integral diverges: {0}")]
    DivergentTail(String),
    #[error("singular assembly: {0}")]
    SingularAssembly(String),
    #[error("case mismatch: {0}")]
    CaseMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
