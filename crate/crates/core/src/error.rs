use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("CFL violation in {stage}: dt = {dt:e} exceeds the admissible {max_dt:e}")]
    Cfl { stage: &'static str, dt: f64, max_dt: f64 },
    #[error("grid spacing {spacing:e} does not resolve kernel scale {h:e} (need spacing <= h/2)")]
    Unresolved { spacing: f64, h: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("negative density: clipped mass {clipped:e} exceeds {allowed:e}")]
    NegativeDensity { clipped: f64, allowed: f64 },
    #[error("blow-up detected at t = {t}: max density {max_rho:e} exceeds cap {cap:e}")]
    BlowUp { t: f64, max_rho: f64, cap: f64 },
    #[error("negative input to {0}")]
    NegativeInput(&'static str),
    #[error("shift {0:?} is not a multiple of the grid spacing")]
    NonGridShift(Vec<f64>),
    #[error("sampler budget too small: relative standard error {achieved:e} exceeds target {target:e}")]
    SamplerBudget { achieved: f64, target: f64 },
    #[error("pressure law `{0}` has not been validated")]
    UnvalidatedLaw(String),
    #[error("infinite weight budget")]
    InfiniteBudget,
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.into(),
        reason: reason.into(),
    }
}
