use thiserror::Error;

/// Errors raised by the solver pipeline. Messages are prefixed with the
/// module that produced them.
#[derive(Debug, Error)]
pub enum GelfandError {
    #[error("domain: {0}")]
    InvalidDomain(String),

    #[error("domain: resolution {resolution} outside [{min}, {max}] for {kind}")]
    Resolution {
        kind: &'static str,
        resolution: usize,
        min: usize,
        max: usize,
    },

    #[error("domain: field does not belong to this grid")]
    GridMismatch,

    #[error("linalg: {0}")]
    SingularSystem(String),

    #[error("flow: blow-up suspected at t = {t}: max u = {max_u}")]
    BlowUp { t: f64, max_u: f64 },

    #[error("flow: positivity lost at t = {t}: min w = {min_w}")]
    PositivityLost { t: f64, min_w: f64 },

    #[error("flow: {0}")]
    Flow(String),

    #[error("steady: Newton failed after {iterations} iterations at lambda = {lambda} (residual {residual:e})")]
    NewtonFailure {
        lambda: f64,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("steady: eigenvalue iteration did not converge (estimate {estimate}, residual {residual:e})")]
    EigenFailure { estimate: f64, residual: f64 },

    #[error("steady: {0}")]
    Steady(String),

    #[error("geometry: degenerate normal derivative |u_nu| = {value:e} at node {node}")]
    DegenerateNormal { node: usize, value: f64 },

    #[error("geometry: {flagged} of {total} interior nodes lack a Hessian stencil (limit 5%)")]
    TooManyFlagged { flagged: usize, total: usize },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("barriers: {0}")]
    Barriers(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GelfandError>;
