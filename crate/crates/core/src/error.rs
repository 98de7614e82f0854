use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("resolution too small: n_per_unit = {0} (need at least 2)")]
    ResolutionTooSmall(usize),
    #[error("non-positive domain dimensions {lx} x {ly}")]
    NonPositiveDimensions { lx: f64, ly: f64 },
    #[error("grid spacing differs between axes: hx = {hx}, hy = {hy}")]
    SpacingMismatch { hx: f64, hy: f64 },
    #[error("grid needs at least 3 nodes per side, got {nx} x {ny}")]
    TooFewNodes { nx: usize, ny: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("random law has empty support")]
    EmptySupport,
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("chi = 0: the cell minimizer degenerates to an arbitrary constant")]
    ZeroChi,
    #[error("cell function is not reflection-symmetric; tiled traces would not match")]
    NonSymmetricCell,
    #[error("field must be strictly positive (min value {0:e})")]
    NotPositive(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("descent diverged at sweep {sweep}: energy rose from {before} to {after}")]
    Diverged { sweep: usize, before: f64, after: f64 },
    #[error("non-unique minimizer: nodes {0:?} and {1:?} interpolate to distinct points with equal values")]
    NonUniqueMinimizer([f64; 2], [f64; 2]),
    #[error("coincident points {0} and {1}")]
    CoincidentPoints(usize, usize),
    #[error("bisection bracket failure for n = {n} on [{lo}, {hi}]")]
    BracketFailure { n: usize, lo: f64, hi: f64 },
    #[error("density must have total mass 1, got {0}")]
    MassNotOne(f64),
    #[error("quadratic form is not positive definite")]
    NotPositiveDefinite,
    #[error("infeasible mean {beta}: must lie in [{lo}, {hi}]")]
    InfeasibleBeta { beta: f64, lo: f64, hi: f64 },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
