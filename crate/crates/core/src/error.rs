use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension {dim}: need at least 3 nodes, got {count}")]
    TooFewNodes { dim: usize, count: usize },
    #[error("dimension {dim}: max must exceed min")]
    NonMonotoneBounds { dim: usize },
    #[error("radius {0} is not allowed here")]
    NegativeRadius(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("point {point:?} outside grid bounds")]
    OutOfBounds { point: Vec<f64> },
    #[error("bad dimension selection: {0}")]
    BadDims(String),
    #[error("empty summand: second operand has no sub-zero node")]
    EmptySummand,
    #[error("grid has no node at the origin along dimension {0}")]
    NoOriginNode(usize),
    #[error("empty set: no sub-zero node")]
    EmptySet,
    #[error("corrupt snapshot: {0}")]
    CorruptFile(String),
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u32),
    #[error("unbounded speed in dissipation bound")]
    UnboundedSpeed,
    #[error("CFL violation: dt {dt} exceeds stable bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("non-finite value produced at node {node}")]
    NonFinite { node: usize },
    #[error("input out of bounds: {0}")]
    InputOutOfBounds(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("relative domain too small after expansion (sub-zero set touches boundary)")]
    DomainTooSmall,
    #[error("avoid region is empty")]
    EmptyAvoidRegion,
    #[error("vehicle {vehicle}: infeasible, {reason}")]
    Infeasible { vehicle: String, reason: String },
    #[error("replanning infeasible for vehicle {vehicle}: {reason}")]
    ReplanInfeasible { vehicle: String, reason: String },
    #[error("injection failed: {0}")]
    InjectionFailed(String),
    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("units error at {path}: {msg}")]
    Units { path: String, msg: String },
    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),
    #[error("no plan for vehicle {0}")]
    MissingPlan(String),
    #[error("separation breach: {0}")]
    SeparationBreach(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
