use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("entry ({row}, {col}) outside a {nrows}x{ncols} matrix")]
    IndexOutOfRange { row: usize, col: usize, nrows: usize, ncols: usize },

    #[error("state not representable: {0}")]
    StateNotRepresentable(String),

    #[error("truncation too small for coherent state: need n_max >= {required:.2}, have {n_max}")]
    TruncationTooSmall { required: f64, n_max: usize },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("step limit of {max_steps} exceeded at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("trace drift {drift:e} at t = {t} exceeds abort threshold")]
    TraceDrift { t: f64, drift: f64 },

    #[error("reduced system is conservative-only (kappa = {kappa}, gamma = {gamma})")]
    ReducedNotConservative { kappa: f64, gamma: f64 },

    #[error("bracket failure: predicate is {value} over the whole coupling bracket [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64, value: bool },

    #[error("states not localized; reduce J/g (best overlap {overlap:.3})")]
    NotLocalized { overlap: f64 },

    #[error("averaging window [{start}, {end}] exceeds trajectory span [{span_start}, {span_end}]")]
    WindowOutOfRange { start: f64, end: f64, span_start: f64, span_end: f64 },

    #[error("initial photon number is zero")]
    ZeroInitialPhotons,
}
