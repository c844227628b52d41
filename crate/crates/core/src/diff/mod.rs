//! Minimal differentiable-computation engine: dense feedforward networks
//! with reverse-mode gradients and an Adam optimizer.
//!
//! Everything runs in 64-bit floats on a single thread; given identical
//! seeds and data the parameter trajectory is bitwise reproducible.

mod adam;
mod conv;
mod io;
mod mlp;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState, StepOutcome};
pub use conv::{conv_backward, conv_forward, ConvSpec, ConvTape};
pub use io::{read_flat_f64, write_flat_f64};
pub use mlp::{backward, forward, Activation, Head, MlpGrads, MlpParams, MlpSpec, Tape};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiffError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("tape already consumed by a backward pass")]
    TapeConsumed,
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("parameter blob length {got} does not match spec ({expected})")]
    ParamCount { expected: usize, got: usize },
}
