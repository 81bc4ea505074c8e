use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::error::{invalid, Error, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    value: Tensor,
    grad: Tensor,
    m: Tensor,
    v: Tensor,
}

/// Named trainable tensors with gradient slots and Adam moments, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: BTreeMap<String, usize>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(invalid(alloc::format!("duplicate parameter {name}")));
        }
        let id = self.entries.len();
        let zeros = Tensor::zeros(value.shape());
        self.entries.push(Entry {
            name: name.to_string(),
            grad: zeros.clone(),
            m: zeros.clone(),
            v: zeros,
            value,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    /// `(name, value)` pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Number of optimizer updates applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn accumulate_grad(&mut self, id: ParamId, grad: &[f64]) -> Result<()> {
        let e = &mut self.entries[id.0];
        if grad.len() != e.grad.len() {
            return Err(Error::Shape {
                op: "accumulate_grad",
                lhs: e.grad.shape().to_vec(),
                rhs: alloc::vec![grad.len()],
            });
        }
        for (g, d) in e.grad.data_mut().iter_mut().zip(grad) {
            *g += d;
        }
        Ok(())
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for e in &mut self.entries {
            e.grad.data_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }

    /// Overwrites a value by name, keeping the registered shape.
    pub fn set_value(&mut self, name: &str, shape: &[usize], data: Vec<f64>) -> Result<()> {
        let id = self
            .id(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))?;
        let e = &mut self.entries[id.0];
        if e.value.shape() != shape {
            return Err(Error::Shape {
                op: "set_value",
                lhs: e.value.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        e.value = Tensor::new(shape.to_vec(), data)?;
        Ok(())
    }

    /// One Adam update with bias correction using the accumulated gradients.
    pub fn adam_step(&mut self, opt: &Adam) {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - libm::pow(opt.beta1, t);
        let bc2 = 1.0 - libm::pow(opt.beta2, t);
        for e in &mut self.entries {
            let g = e.grad.data();
            let m = e.m.data_mut();
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = opt.beta1 * *mi + (1.0 - opt.beta1) * gi;
            }
            let v = e.v.data_mut();
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi = opt.beta2 * *vi + (1.0 - opt.beta2) * gi * gi;
            }
            let (m, v) = (e.m.data(), e.v.data());
            for ((p, mi), vi) in e.value.data_mut().iter_mut().zip(m).zip(v) {
                let mhat = mi / bc1;
                let vhat = vi / bc2;
                *p -= opt.lr * mhat / (libm::sqrt(vhat) + opt.eps);
            }
        }
    }
}

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.insert("a", Tensor::zeros(&[2])).unwrap();
        assert!(s.insert("a", Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // with bias correction the first update is lr * sign(g) (up to eps)
        let mut s = ParamStore::new();
        let id = s.insert("p", Tensor::new(vec![2], vec![1.0, -1.0]).unwrap()).unwrap();
        s.accumulate_grad(id, &[0.5, -2.0]).unwrap();
        let opt = Adam { lr: 0.1, ..Adam::default() };
        s.adam_step(&opt);
        let v = s.value(id).data();
        assert!((v[0] - 0.9).abs() < 1e-6);
        assert!((v[1] + 0.9).abs() < 1e-6);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn set_value_checks_shape() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::zeros(&[2, 3])).unwrap();
        assert!(s.set_value("w", &[3, 2], vec![0.0; 6]).is_err());
        assert!(s.set_value("nope", &[2, 3], vec![0.0; 6]).is_err());
        s.set_value("w", &[2, 3], vec![1.0; 6]).unwrap();
        assert_eq!(s.value(s.id("w").unwrap()).data()[5], 1.0);
    }
}
