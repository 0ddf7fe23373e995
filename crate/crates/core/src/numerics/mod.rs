//! Tensor core: reverse-mode tape, 1D conv layers, losses and Adam.

mod adam;
pub mod kernels;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use params::{normal_init, ParamStore};
pub use tape::{bce_value, sigmoid, softmax_rows, Activation, Tape, Var, PROB_EPS};
pub use tensor::Tensor;

/// Slope used by every leaky ReLU in the networks.
pub const LEAKY_SLOPE: f64 = 0.2;
