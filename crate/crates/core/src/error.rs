use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex normal undefined at vertex {vertex} (fold or cusp)")]
    DegenerateNormal { vertex: usize },

    #[error("undefined conormal at boundary vertex {vertex}")]
    UndefinedConormal { vertex: usize },

    #[error("outside tubular neighborhood: {0}")]
    OutsideTubularNeighborhood(String),

    #[error("gradient vanishes at {0:?}")]
    GradientVanishes([f64; 3]),

    #[error("no surface samples in region")]
    NoSurfaceSamples,

    #[error("boundary vertex off constraint: {0:?}")]
    BoundaryOffConstraint(Vec<usize>),

    #[error("projection left tubular band at vertex {vertex}")]
    ProjectionLeftBand { vertex: usize },

    #[error("line search failed after {0} halvings")]
    LineSearchFailed(usize),

    #[error("iteration stagnated after {0} iterations")]
    Stagnated(usize),

    #[error("radius exceeds R₀/2: radius {radius} >= limit {limit}")]
    RadiusExceedsHalfR0 { radius: f64, limit: f64 },

    #[error("ball touches constraint: radius {radius} >= distance {distance}")]
    BallTouchesConstraint { radius: f64, distance: f64 },

    #[error("empty ball")]
    EmptyBall,

    #[error("boundary not on plane at vertex {vertex} (offset {offset:e})")]
    BoundaryNotOnPlane { vertex: usize, offset: f64 },

    #[error("residual too large to weld: {0} rad")]
    ResidualTooLargeToWeld(f64),

    #[error("unsupported primitive under {0}")]
    UnsupportedTransform(&'static str),

    #[error("chart radius exceeds injectivity of projection")]
    ChartInversion,

    #[error("insufficient t-rows: need t = 0, h, 2h")]
    InsufficientRows,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
