//! Reverse-mode automatic differentiation over dense `f64` arrays.

mod gaussian;
mod kernels;
mod params;
mod tape;
mod tensor;

pub use gaussian::{gaussian_sample, DiagGaussian};
pub use params::{Adam, ParamId, ParamStore};
pub use tape::{Gradients, ParamGrads, Tape, Var, SOFTPLUS_LINEAR_ABOVE};
pub use tensor::Tensor;

#[cfg(test)]
pub(crate) use tape::sigmoid;
