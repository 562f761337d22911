use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point {0:?} lies outside every modeled region")]
    Unmodeled([f64; 3]),
    #[error("orbit leaves the coding pair at time {0} (not in horseshoe)")]
    NotInHorseshoe(i64),
    #[error("empty intersection while decoding: {0}")]
    InternalInconsistency(String),
    #[error("empty measure")]
    EmptyMeasure,
    #[error("infeasible in ranges after {evaluations} evaluations")]
    InfeasibleInRanges { evaluations: usize },
    #[error("code is window-only and shorter than the requested horizon {0}")]
    WindowTooShort(i64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("resolution exhausted at step {step}: area {area:e} below {floor:e}")]
    ResolutionExhausted { step: u64, area: f64, floor: f64 },
    #[error("1-filling hypothesis not met at this horizon: half beta sum {half_beta} < tau sum {tau}")]
    GateFailed { half_beta: f64, tau: u64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
