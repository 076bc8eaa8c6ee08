//! Crate-wide error type.

use thiserror::Error;

pub type LdpResult<T> = Result<T, LdpError>;

#[derive(Debug, Error)]
pub enum LdpError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("time {t} is not a node of the grid")]
    TimeOffGrid { t: f64 },

    #[error("path prefix too short: need node {need}, have {have} nodes")]
    PrefixTooShort { need: usize, have: usize },

    #[error("delay model requires an initial segment")]
    MissingSegment,

    #[error("initial segment incompatible with grid: {0}")]
    SegmentMismatch(String),

    #[error("state diverged at step {step}: non-finite value")]
    DivergedPath { step: usize },

    #[error("{diverged} of {total} sample paths diverged (limit {limit})")]
    TooManyDiverged {
        diverged: u64,
        total: u64,
        limit: u64,
    },

    #[error("all sample paths diverged")]
    AllDiverged,

    #[error("control norm^2 {norm_sq} exceeds cap {cap}")]
    CapExceeded { norm_sq: f64, cap: f64 },

    #[error("drift floor violation (R2): {0}")]
    DriftFloorViolation(String),

    #[error("Hoelder modulus integral of rho^-2 does not diverge at zero")]
    ModulusIntegralConvergent,

    #[error("model declares no Hoelder modulus rho")]
    MissingModulus,

    #[error("dispersion degenerate along the path at step {step}")]
    DegenerateDispersion { step: usize },

    #[error("functional must be a bounded terminal-cost variant")]
    NotACost,

    #[error("model family provides no coefficient derivatives")]
    NoJacobian,

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}
