use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
///
/// A rank-0 tensor (empty shape) holds exactly one value and is used for scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape {
                op: "tensor",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape {
                op: "tensor",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: &[usize], v: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![v; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    /// A `[1, n]` row vector.
    pub fn row(data: Vec<f64>) -> Self {
        Self {
            shape: vec![1, data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Shape {
                op: "reshape",
                lhs: self.shape,
                rhs: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }
}
