//! Stochastic latent residual video prediction.
//!
//! `no_std` (with `alloc`) core: a small reverse-mode autodiff engine, the neural
//! building blocks, the latent residual model with Euler sub-stepping, variational
//! training, satellite radiance preprocessing, a synthetic video generator and the
//! best-of-N evaluation protocol. File formats, networking and the command line
//! live in the `lrvp` crate.

#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diff;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod exec;
pub mod goes;
pub mod nets;
pub mod rng;
pub mod synth;
pub mod training;
pub mod video;

pub use error::{Error, Result};
