use alloc::format;
use alloc::vec::Vec;

use crate::diff::Tensor;
use crate::error::{invalid, Error, Result};

/// `(T, B, H, W)` video, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl VideoTensor {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() || dims[1..].contains(&0) {
            return Err(Error::Shape {
                op: "video",
                lhs: dims.to_vec(),
                rhs: alloc::vec![data.len()],
            });
        }
        Ok(Self { dims, data })
    }

    /// Stacks equally shaped `[B,H,W]` frames. An empty list needs explicit frame dims.
    pub fn from_frames(frames: &[Tensor], frame_dims: [usize; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(frames.len() * frame_dims.iter().product::<usize>());
        for f in frames {
            if f.shape() != frame_dims {
                return Err(Error::Shape {
                    op: "video_from_frames",
                    lhs: f.shape().to_vec(),
                    rhs: frame_dims.to_vec(),
                });
            }
            data.extend_from_slice(f.data());
        }
        Self::new([frames.len(), frame_dims[0], frame_dims[1], frame_dims[2]], data)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims[0]
    }

    pub fn is_empty(&self) -> bool {
        self.dims[0] == 0
    }

    pub fn frame_dims(&self) -> [usize; 3] {
        [self.dims[1], self.dims[2], self.dims[3]]
    }

    pub fn frame_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame_data(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame(&self, t: usize) -> Tensor {
        Tensor::new(self.frame_dims().to_vec(), self.frame_data(t).to_vec()).expect("frame dims are positive")
    }

    /// Frames `start..end` as a new video.
    pub fn frames(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(invalid(format!("frame range {start}..{end} outside 0..{}", self.len())));
        }
        let n = self.frame_len();
        Self::new(
            [end - start, self.dims[1], self.dims[2], self.dims[3]],
            self.data[start * n..end * n].to_vec(),
        )
    }

    pub fn in_unit_interval(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }
}
