use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("framework has no vertices")]
    Empty,
    #[error("unsupported spatial dimension {0} (only 2 is supported)")]
    UnsupportedDimension(usize),
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("vertex `{vertex}` has non-positive mass {mass}")]
    NonPositiveMass { vertex: String, mass: f64 },
    #[error("edge references unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("self-loop on vertex `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0}")]
    DuplicateEdge(String),
    #[error("edge {edge} has non-positive rest length {length}")]
    NonPositiveLength { edge: String, length: f64 },
    #[error("framework graph is disconnected (vertex `{0}` unreachable from the first vertex)")]
    Disconnected(String),
    #[error("size mismatch for {what}: expected {expected}, found {found}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("missing position for vertex `{0}`")]
    MissingPosition(String),
    #[error("degenerate configuration: edge {0} has zero length")]
    DegenerateEdge(String),
    #[error("tension system is not solvable (compatibility violation {violation:.3e})")]
    Unsolvable { violation: f64 },
    #[error("tangency system incompatible (residual {residual:.3e}); point is off the constraint manifold")]
    TangencyIncompatible { residual: f64 },
    #[error("length constraint violated by {residual:.3e} (limit {limit:.1e})")]
    LengthConstraintViolated { residual: f64, limit: f64 },
    #[error("projection did not converge{}: residual {residual:.3e} after {iterations} iterations", step_suffix(*.step))]
    ProjectionFailed {
        step: Option<usize>,
        residual: f64,
        iterations: usize,
    },
    #[error("policy returned {found} coefficients for a gauge dimension of {expected}")]
    PolicyArity { expected: usize, found: usize },
    #[error("cannot gauge-fix edge {edge}: {reason}")]
    NotFixable { edge: String, reason: String },
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("framework is not the four-mass reference system: {0}")]
    WrongShape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid gauge policy `{0}`")]
    InvalidPolicy(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(s) => format!(" at step {s}"),
        None => String::new(),
    }
}
