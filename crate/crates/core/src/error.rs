use thiserror::Error;

/// Errors raised by the geometry routines and the suite runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,
    #[error("duality map is multivalued at this point")]
    MultiValued,
    #[error("vector is not quasiorthogonal to the base vector")]
    NotQuasiorthogonal,
    #[error("vectors are not unit vectors (norms {0} and {1})")]
    NotUnitVectors(f64, f64),
    #[error("empty grid")]
    EmptyGrid,
    #[error("{what} = {value} lies outside the admissible domain")]
    OutOfDomain { what: &'static str, value: f64 },
    #[error("curve does not cover the requested range: {0}")]
    InsufficientCoverage(String),
    #[error("argument ranges do not overlap")]
    RangesDoNotOverlap,
    #[error("function is not convex near t = {at}")]
    NotConvex { at: f64 },
    #[error("function is negative at t = {at}")]
    NegativeValue { at: f64 },
    #[error("function does not vanish at zero")]
    NonzeroAtZero,
    #[error("t^2/psi(t) does not decay to zero on the grid")]
    PrecessionViolated,
    #[error("point is not on the boundary of the set")]
    InteriorPoint,
    #[error("no sample found in the shell 0 < dist < R")]
    EmptyShell,
    #[error("bad coordinate index set: {0}")]
    BadIndexSet(String),
    #[error("body is not centrally symmetric")]
    NotSymmetric,
    #[error("degenerate body: {0}")]
    DegenerateBody(String),
    #[error("line does not meet the unit sphere")]
    NoIntersection,
    #[error("point is not on the supporting line")]
    NotOnSupportingLine,
    #[error("no feasible pairs were sampled")]
    NoFeasiblePairs,
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    #[error("invalid norm: {0}")]
    InvalidNorm(String),
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
