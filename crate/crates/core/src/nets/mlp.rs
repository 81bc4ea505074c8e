use alloc::format;
use alloc::vec::Vec;

use super::Linear;
use crate::diff::{ParamStore, Tape, Var};
use crate::error::{invalid, Result};
use crate::rng::Rng;

/// Layer widths of a tanh MLP with an identity output layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
}

impl MlpSpec {
    pub fn new(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(invalid(format!("mlp widths {widths:?}: need >= 2 positive widths")));
        }
        Ok(Self { widths: widths.to_vec() })
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub spec: MlpSpec,
    layers: Vec<Linear>,
}

impl Mlp {
    /// `zero_last` zero-initializes the output layer so the map starts at 0.
    pub fn new(store: &mut ParamStore, prefix: &str, spec: MlpSpec, zero_last: bool, rng: &mut Rng) -> Result<Self> {
        let n = spec.widths.len() - 1;
        let mut layers = Vec::with_capacity(n);
        for (i, pair) in spec.widths.windows(2).enumerate() {
            let name = format!("{prefix}.l{i}");
            let layer = if zero_last && i == n - 1 {
                Linear::zeroed(store, &name, pair[0], pair[1])?
            } else {
                Linear::new(store, &name, pair[0], pair[1], rng)?
            };
            layers.push(layer);
        }
        Ok(Self { spec, layers })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h)?;
            if i != last {
                h = tape.tanh(h)?;
            }
        }
        Ok(h)
    }
}
