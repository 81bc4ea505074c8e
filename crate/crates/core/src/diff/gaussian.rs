use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{invalid, Error, Result};

/// Diagonal Gaussian whose mean and standard deviation live on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiagGaussian {
    pub mean: Var,
    pub std: Var,
}

impl DiagGaussian {
    pub fn width(&self, tape: &Tape) -> usize {
        tape.value(self.mean).len()
    }
}

/// Reparameterized draw `mean + std * eps`, differentiable in both parameters.
pub fn gaussian_sample(tape: &mut Tape, g: DiagGaussian, eps: Tensor) -> Result<Var> {
    let (m, s) = (tape.value(g.mean), tape.value(g.std));
    if m.shape() != s.shape() || eps.shape() != m.shape() {
        return Err(Error::Shape {
            op: "gaussian_sample",
            lhs: m.shape().to_vec(),
            rhs: eps.shape().to_vec(),
        });
    }
    if s.data().iter().any(|&v| v <= 0.0) {
        return Err(invalid("gaussian_sample: std must be strictly positive"));
    }
    let e = tape.constant(eps)?;
    let scaled = tape.mul_elem(g.std, e)?;
    tape.add(g.mean, scaled)
}
