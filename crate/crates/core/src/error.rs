//! Error type shared by all kernels.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input field or state contained NaN/inf before any computation started.
    #[error("non-finite input in {context}")]
    NonFiniteInput { context: &'static str },

    /// A grid was too small for the requested stencil or operation.
    #[error("grid too small: {context} needs at least {needed} points, got {got}")]
    GridTooSmall {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    /// Mismatched grids between fields that must share one.
    #[error("grid mismatch in {context}")]
    GridMismatch { context: &'static str },

    /// Invalid parameter combination (e.g. integrable flag with α ≠ 0).
    #[error("invalid parameters: {reason}")]
    InvalidParams { reason: String },

    /// Time integration produced non-finite values.
    #[error("numerical blow-up at step {step} (t = {t})")]
    BlowUp { step: usize, t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
