use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("readout grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite readout value at step {step}")]
    NonFiniteReadout { step: usize },
    #[error("no level gap: system has a single level")]
    NoLevelGap,
    #[error("free solution requires V=0")]
    NonZeroCoupling,
    #[error("outside Zeno branch: T_lr = {t_lr} must be below T_R/2pi = {bound}")]
    OutsideZenoBranch { t_lr: f64, bound: f64 },
    #[error("zeroth approximation invalid: T_R = {t_r} must be below 2pi T_lr = {bound}")]
    ZerothApproximationInvalid { t_r: f64, bound: f64 },
    #[error("need dense trajectory (record_stride = {0}, expected 1)")]
    NeedDenseTrajectory(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("fit did not converge: {0}")]
    FitFailed(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of a numerical procedure rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::FitFailed(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
