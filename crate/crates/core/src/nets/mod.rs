//! Trainable building blocks: MLPs, Gaussian heads, an LSTM cell and a small
//! convolutional frame encoder/decoder pair.
//!
//! Blocks only hold [`ParamId`]s; values live in a [`ParamStore`], so every
//! forward pass is a pure function of `(store, inputs)`.

mod conv;
mod lstm;
mod mlp;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

pub use crate::diff::DiagGaussian;
use crate::diff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;
pub use conv::{ConvCoderSpec, ConvDecoder, ConvEncoder};
pub use lstm::{LstmCell, LstmState};
pub use mlp::{Mlp, MlpSpec};

/// Lower bound added to every predicted standard deviation.
pub const STD_FLOOR: f64 = 1e-4;

/// Negative slope of the leaky ReLUs inside the convolutional stacks.
pub const LEAKY_SLOPE: f64 = 0.2;

fn uniform(rng: &mut Rng, shape: &[usize], bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// Init gain for layers followed by a leaky ReLU of slope [`LEAKY_SLOPE`].
pub(crate) fn leaky_gain() -> f64 {
    libm::sqrt(2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE))
}

/// Registers a weight drawn uniformly with variance `gain^2 / fan_in`.
///
/// Gain 1 keeps activations at unit scale through linear and tanh layers;
/// [`leaky_gain`] does the same ahead of leaky ReLUs.
pub(crate) fn init_weight(store: &mut ParamStore, name: &str, shape: &[usize], fan_in: usize, gain: f64, rng: &mut Rng) -> Result<ParamId> {
    let bound = gain * libm::sqrt(3.0 / fan_in as f64);
    store.insert(name, uniform(rng, shape, bound))
}

pub(crate) fn init_zeros(store: &mut ParamStore, name: &str, shape: &[usize]) -> Result<ParamId> {
    store.insert(name, Tensor::zeros(shape))
}

/// Affine map on row vectors: `[n, in] -> [n, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_width: usize,
    pub out_width: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, prefix: &str, in_width: usize, out_width: usize, rng: &mut Rng) -> Result<Self> {
        Self::with_gain(store, prefix, in_width, out_width, 1.0, rng)
    }

    pub fn with_gain(store: &mut ParamStore, prefix: &str, in_width: usize, out_width: usize, gain: f64, rng: &mut Rng) -> Result<Self> {
        let weight = init_weight(store, &format!("{prefix}.w"), &[in_width, out_width], in_width, gain, rng)?;
        let bias = init_zeros(store, &format!("{prefix}.b"), &[out_width])?;
        Ok(Self { weight, bias, in_width, out_width })
    }

    pub fn zeroed(store: &mut ParamStore, prefix: &str, in_width: usize, out_width: usize) -> Result<Self> {
        let weight = init_zeros(store, &format!("{prefix}.w"), &[in_width, out_width])?;
        let bias = init_zeros(store, &format!("{prefix}.b"), &[out_width])?;
        Ok(Self { weight, bias, in_width, out_width })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.value(x).shape().last().copied().unwrap_or(1);
        if w != self.in_width {
            return Err(Error::Shape {
                op: "linear",
                lhs: tape.value(x).shape().to_vec(),
                rhs: alloc::vec![self.in_width, self.out_width],
            });
        }
        let wv = tape.param(store, self.weight);
        let bv = tape.param(store, self.bias);
        let y = tape.matmul(x, wv)?;
        tape.add_bias(y, bv)
    }
}

/// Mean and floored-softplus standard deviation from two affine maps.
#[derive(Debug, Clone)]
pub struct GaussianHead {
    pub mean: Linear,
    pub std: Linear,
}

impl GaussianHead {
    pub fn new(store: &mut ParamStore, prefix: &str, in_width: usize, out_width: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            mean: Linear::new(store, &format!("{prefix}.mean"), in_width, out_width, rng)?,
            std: Linear::new(store, &format!("{prefix}.std"), in_width, out_width, rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<DiagGaussian> {
        let mean = self.mean.forward(tape, store, x)?;
        let raw = self.std.forward(tape, store, x)?;
        let sp = tape.softplus(raw)?;
        let std = tape.shift(sp, STD_FLOOR)?;
        Ok(DiagGaussian { mean, std })
    }
}

/// One line per parameter (`name shape count`) plus a total.
pub fn describe(store: &ParamStore) -> Vec<String> {
    let mut lines: Vec<String> = store
        .iter()
        .map(|(name, t)| format!("{name} {:?} {}", t.shape(), t.len()))
        .collect();
    lines.push(format!("total {}", store.num_scalars()));
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn zero_head_gives_log2_std() {
        let mut store = ParamStore::new();
        let head = GaussianHead::new(&mut store, "h", 3, 2, &mut rng_from(0)).unwrap();
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::row(alloc::vec![0.3, -2.0, 5.0])).unwrap();
        let g = head.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(g.mean).data(), &[0.0, 0.0]);
        for &s in tape.value(g.std).data() {
            assert!((s - (core::f64::consts::LN_2 + 1e-4)).abs() < 1e-15);
        }
    }

    #[test]
    fn std_above_floor_for_extreme_inputs() {
        let mut store = ParamStore::new();
        let head = GaussianHead::new(&mut store, "h", 1, 1, &mut rng_from(3)).unwrap();
        let w = head.std.weight;
        store.value_mut(w).data_mut()[0] = 1.0;
        for x in [-1e3, -50.0, 0.0, 50.0] {
            let mut tape = Tape::new();
            let xv = tape.constant(Tensor::row(alloc::vec![x])).unwrap();
            let g = head.forward(&mut tape, &store, xv).unwrap();
            assert!(tape.value(g.std).item() >= STD_FLOOR);
        }
    }

    #[test]
    fn linear_rejects_wrong_width() {
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "l", 3, 2, &mut rng_from(0)).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::row(alloc::vec![1.0, 2.0])).unwrap();
        assert!(matches!(lin.forward(&mut tape, &store, x), Err(Error::Shape { .. })));
    }
}
