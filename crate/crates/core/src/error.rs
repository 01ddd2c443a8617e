use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::grid::DistField;

pub type Result<T, E = VfpError> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum VfpError {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("negative value {value:e} at cell {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("non-finite value at cell {index}")]
    NonFinite { index: usize },
    #[error("grid mismatch")]
    GridMismatch,
    #[error("degenerate temperature at spatial cell {cell}")]
    DegenerateTemperature { cell: usize },
    #[error("kernel under-resolved: eps = {eps} < dx = {dx}")]
    UnderResolvedKernel { eps: f64, dx: f64 },
    #[error("zero mass")]
    ZeroMass,
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("Picard divergence after {iterations} iterations")]
    PicardDivergence { iterations: usize, residuals: Vec<f64> },
    #[error("solver aborted at t = {time}: {reason}")]
    Aborted {
        time: f64,
        reason: String,
        snapshot: Box<DistField>,
    },
}

impl VfpError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        VfpError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
