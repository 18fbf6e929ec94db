use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("truncation too large: {count} multi-indices exceed the cap of {cap}")]
    TruncationTooLarge { count: u128, cap: usize },
    #[error("factorial overflow for count {0}")]
    FactorialOverflow(u32),
    #[error("noise channel {channel} out of range 1..={max}")]
    ChannelOutOfRange { channel: usize, max: usize },
    #[error("temporal mode {mode} out of range 1..={max}")]
    ModeOutOfRange { mode: usize, max: usize },
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite coefficient `{name}` at t = {t}")]
    NonFiniteCoefficient { name: String, t: f64 },
    #[error("linear solve did not converge: residual {residual:e} after {iterations} iterations")]
    SolveNotConverged { residual: f64, iterations: usize },
    #[error("non-finite value in coefficient {index} at t = {t}")]
    BlowUp { index: String, t: f64 },
    #[error("storage of {bytes} bytes exceeds the budget of {budget} bytes")]
    MemoryBudget { bytes: u128, budget: u128 },
    #[error("no admissible weight sequence: {0}")]
    Degenerate(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}
