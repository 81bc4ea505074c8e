//! Test oracles shared by the core integration tests and the acceptance suite.
#![allow(dead_code)]

use lrvp_core::diff::{ParamStore, Tape, Tensor, Var};
use lrvp_core::rng::{normal_tensor, rng_from};
use lrvp_core::Result;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Gradients below this magnitude are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-4;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Reduces any output to a scalar through fixed random weights so every
/// output coordinate contributes.
pub fn weighted_sum(tape: &mut Tape, out: Var, seed: u64) -> Result<Var> {
    let shape = tape.value(out).shape().to_vec();
    let w = tape.constant(normal_tensor(&mut rng_from(seed), &shape))?;
    let prod = tape.mul_elem(out, w)?;
    tape.sum(prod)
}

fn eval_scalar(x: &Tensor, f: &dyn Fn(&mut Tape, Var) -> Result<Var>) -> f64 {
    let mut tape = Tape::new();
    let v = tape.constant(x.clone()).unwrap();
    let out = f(&mut tape, v).unwrap();
    let root = weighted_sum(&mut tape, out, 99).unwrap();
    tape.value(root).item()
}

/// Worst relative error of the tape gradient with respect to `x` over all of its coordinates.
pub fn check_input_grad(x: &Tensor, f: &dyn Fn(&mut Tape, Var) -> Result<Var>) -> f64 {
    let mut tape = Tape::new();
    let v = tape.constant(x.clone()).unwrap();
    let out = f(&mut tape, v).unwrap();
    let root = weighted_sum(&mut tape, out, 99).unwrap();
    let grads = tape.backward(root).unwrap();
    let analytic = grads.wrt(v).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; x.len()]);
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = x.clone();
        plus.data_mut()[i] += FD_STEP;
        let mut minus = x.clone();
        minus.data_mut()[i] -= FD_STEP;
        let numeric = (eval_scalar(&plus, f) - eval_scalar(&minus, f)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(a, numeric));
    }
    worst
}

/// Worst relative error per parameter tensor for a scalar-valued `loss`, probing
/// at most `probes` coordinates of each tensor (all of them when it is small).
pub fn check_param_grads(store: &ParamStore, probes: usize, loss: &dyn Fn(&mut Tape, &ParamStore) -> Result<Var>) -> Vec<(String, f64)> {
    let mut tape = Tape::new();
    let root = loss(&mut tape, store).unwrap();
    let grads = tape.backward(root).unwrap().into_param_grads();
    let eval = |s: &ParamStore| {
        let mut t = Tape::new();
        let r = loss(&mut t, s).unwrap();
        t.value(r).item()
    };
    let mut out = Vec::new();
    let mut rng = rng_from(1234);
    for id in store.ids().collect::<Vec<_>>() {
        let n = store.value(id).len();
        let analytic: Vec<f64> = grads
            .0
            .iter()
            .find(|(p, _)| *p == id)
            .map(|(_, g)| g.clone())
            .unwrap_or_else(|| vec![0.0; n]);
        let coords: Vec<usize> = if n <= probes {
            (0..n).collect()
        } else {
            rand::seq::index::sample(&mut rng, n, probes).into_vec()
        };
        let mut worst = 0.0f64;
        for i in coords {
            let mut plus = store.clone();
            plus.value_mut(id).data_mut()[i] += FD_STEP;
            let mut minus = store.clone();
            minus.value_mut(id).data_mut()[i] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[i], numeric));
        }
        out.push((store.name(id).to_string(), worst));
    }
    out
}

/// Deterministic uniform values in `[0, 1)` from a 32-bit LCG, reproducible outside Rust.
pub fn lcg_uniform(seed: u64, n: usize) -> Vec<f64> {
    let mut x = seed;
    (0..n)
        .map(|_| {
            x = (1_664_525 * x + 1_013_904_223) % (1 << 32);
            x as f64 / (1u64 << 32) as f64
        })
        .collect()
}
