use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("top simplices have unequal sizes ({first} and {other})")]
    MixedDimension { first: usize, other: usize },
    #[error("duplicate simplex {0:?}")]
    DuplicateSimplex(Vec<usize>),
    #[error("simplex {0:?} repeats a vertex")]
    RepeatedVertex(Vec<usize>),
    #[error("complex is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("simplex references vertex {vertex}, but only {count} vertices exist")]
    DanglingVertexRef { vertex: usize, count: usize },
    #[error("vertex {0} belongs to no top simplex")]
    IsolatedVertex(usize),
    #[error("unknown simplex {0:?}")]
    UnknownSimplex(Vec<usize>),
    #[error("unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("point is not on the complex: {0}")]
    PointOffComplex(String),
    #[error("simplex {0} is degenerate")]
    DegenerateSimplex(usize),
    #[error("function is not finite at {0}")]
    PoleAtPoint(String),
    #[error("ball of radius {epsilon} leaves the simplex (room {room})")]
    BallLeavesSimplex { epsilon: f64, room: f64 },
    #[error("epsilon must be positive, got {0}")]
    NonpositiveEpsilon(f64),
    #[error("target metric is singular at {0}")]
    TargetMetricSingular(String),
    #[error("point {0} is outside the chart domain")]
    ChartBoundary(String),
    #[error("complex is not admissible: {0}")]
    NotAdmissible(String),
    #[error("linear system is singular: {0}")]
    SingularSystem(String),
    #[error("missing boundary values for vertex {0}")]
    MissingBoundaryValues(usize),
    #[error("no convergence after {} iterations (last residual {:e})", history.len(), history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { history: Vec<f64> },
    #[error("map image left the chart at vertex/sample {0}")]
    ImageLeftChart(usize),
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("projection is not a covering: {0}")]
    NotACovering(String),
    #[error("degree mismatch in component {component}: {left} vs {right}")]
    DegreeMismatch {
        component: usize,
        left: u32,
        right: u32,
    },
    #[error("denominator polynomial in component {0} is identically zero")]
    ZeroDenominatorPolynomial(usize),
    #[error("unknown covering spec {0:?}")]
    UnknownSpec(String),
    #[error("target is not Kähler: {0}")]
    NotKahler(String),
    #[error("function fails the Cauchy-Riemann pre-check (residual {0:e})")]
    NotHolomorphic(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{context}: {source}")]
    Format {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid file content: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
