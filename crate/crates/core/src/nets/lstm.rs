use alloc::format;

use super::{init_weight, init_zeros};
use crate::diff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Hidden and cell vectors, both `[1, width]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub hidden: Var,
    pub cell: Var,
}

/// Standard LSTM cell; gate blocks are ordered input, forget, candidate, output.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_in: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub in_width: usize,
    pub width: usize,
}

impl LstmCell {
    pub fn new(store: &mut ParamStore, prefix: &str, in_width: usize, width: usize, rng: &mut Rng) -> Result<Self> {
        let w_in = init_weight(store, &format!("{prefix}.wx"), &[in_width, 4 * width], in_width, 1.0, rng)?;
        let w_hidden = init_weight(store, &format!("{prefix}.wh"), &[width, 4 * width], width, 1.0, rng)?;
        let bias = init_zeros(store, &format!("{prefix}.b"), &[4 * width])?;
        // forget gate starts open
        store.value_mut(bias).data_mut()[width..2 * width]
            .iter_mut()
            .for_each(|b| *b = 1.0);
        Ok(Self { w_in, w_hidden, bias, in_width, width })
    }

    pub fn zero_state(&self, tape: &mut Tape) -> Result<LstmState> {
        let hidden = tape.constant(Tensor::zeros(&[1, self.width]))?;
        let cell = tape.constant(Tensor::zeros(&[1, self.width]))?;
        Ok(LstmState { hidden, cell })
    }

    pub fn step(&self, tape: &mut Tape, store: &ParamStore, input: Var, state: LstmState) -> Result<LstmState> {
        let iw = tape.value(input).shape().last().copied().unwrap_or(1);
        let hw = tape.value(state.hidden).shape().last().copied().unwrap_or(1);
        if iw != self.in_width || hw != self.width || tape.value(state.cell).shape() != tape.value(state.hidden).shape() {
            return Err(Error::Shape {
                op: "lstm_step",
                lhs: tape.value(input).shape().to_vec(),
                rhs: alloc::vec![self.in_width, self.width],
            });
        }
        let wx = tape.param(store, self.w_in);
        let wh = tape.param(store, self.w_hidden);
        let b = tape.param(store, self.bias);
        let a = tape.matmul(input, wx)?;
        let r = tape.matmul(state.hidden, wh)?;
        let pre = tape.add(a, r)?;
        let pre = tape.add_bias(pre, b)?;
        let n = self.width;
        let i = tape.slice(pre, 0, n)?;
        let i = tape.sigmoid(i)?;
        let f = tape.slice(pre, n, n)?;
        let f = tape.sigmoid(f)?;
        let g = tape.slice(pre, 2 * n, n)?;
        let g = tape.tanh(g)?;
        let o = tape.slice(pre, 3 * n, n)?;
        let o = tape.sigmoid(o)?;
        let keep = tape.mul_elem(f, state.cell)?;
        let write = tape.mul_elem(i, g)?;
        let cell = tape.add(keep, write)?;
        let squashed = tape.tanh(cell)?;
        let hidden = tape.mul_elem(o, squashed)?;
        Ok(LstmState { hidden, cell })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::sigmoid;
    use crate::rng::rng_from;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn all_zero_params_give_zero_hidden() {
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "c", 3, 4, &mut rng_from(0)).unwrap();
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let mut tape = Tape::new();
        let s0 = cell.zero_state(&mut tape).unwrap();
        let x = tape.constant(Tensor::row(vec![1.0, -2.0, 3.0])).unwrap();
        let s1 = cell.step(&mut tape, &store, x, s0).unwrap();
        assert!(tape.value(s1.hidden).data().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn one_unit_cell_matches_hand_arithmetic() {
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "c", 1, 1, &mut rng_from(0)).unwrap();
        // gate order i, f, g, o
        store.set_value("c.wx", &[1, 4], vec![0.5, -0.25, 1.0, 2.0]).unwrap();
        store.set_value("c.wh", &[1, 4], vec![0.1, 0.2, -0.3, 0.4]).unwrap();
        store.set_value("c.b", &[4], vec![0.0, 1.0, 0.0, -1.0]).unwrap();
        let (x, h0, c0) = (0.8, 0.5, -0.2);
        let mut tape = Tape::new();
        let xv = tape.constant(Tensor::row(vec![x])).unwrap();
        let hv = tape.constant(Tensor::row(vec![h0])).unwrap();
        let cv = tape.constant(Tensor::row(vec![c0])).unwrap();
        let s = cell.step(&mut tape, &store, xv, LstmState { hidden: hv, cell: cv }).unwrap();

        let i = sigmoid(0.5 * x + 0.1 * h0);
        let f = sigmoid(-0.25 * x + 0.2 * h0 + 1.0);
        let g = libm::tanh(1.0 * x - 0.3 * h0);
        let o = sigmoid(2.0 * x + 0.4 * h0 - 1.0);
        let c1 = f * c0 + i * g;
        let h1 = o * libm::tanh(c1);
        assert!((tape.value(s.cell).item() - c1).abs() < 1e-15);
        assert!((tape.value(s.hidden).item() - h1).abs() < 1e-15);
    }

    #[test]
    fn hidden_bounded_by_one() {
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "c", 2, 3, &mut rng_from(5)).unwrap();
        let mut tape = Tape::new();
        let mut s = cell.zero_state(&mut tape).unwrap();
        for t in 0..20 {
            let x = tape.constant(Tensor::row(vec![10.0 * t as f64, -7.0])).unwrap();
            s = cell.step(&mut tape, &store, x, s).unwrap();
            assert!(tape.value(s.hidden).data().iter().all(|h| h.abs() <= 1.0));
        }
    }
}
