use alloc::format;
use alloc::vec::Vec;

use super::{init_weight, init_zeros, leaky_gain, Linear, LEAKY_SLOPE};
use crate::diff::{ParamId, ParamStore, Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::rng::Rng;

/// Frame geometry and channel plan shared by the encoder and decoder.
///
/// The encoder runs one stride-2 4x4 convolution per entry of `channels`; the
/// decoder mirrors it with nearest-neighbour upsampling followed by 3x3 convolutions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvCoderSpec {
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    pub channels: Vec<usize>,
    pub latent: usize,
}

impl ConvCoderSpec {
    pub fn validate(&self) -> Result<()> {
        let div = 1usize << self.channels.len();
        if self.bands == 0 || self.latent == 0 || self.channels.is_empty() || self.channels.contains(&0) {
            return Err(invalid(format!("conv coder needs positive sizes: {self:?}")));
        }
        if !self.height.is_multiple_of(div) || !self.width.is_multiple_of(div) {
            return Err(invalid(format!(
                "frame {}x{} not divisible by 2^{}",
                self.height,
                self.width,
                self.channels.len()
            )));
        }
        Ok(())
    }

    /// Spatial size after all stride-2 stages.
    pub fn bottleneck(&self) -> (usize, usize) {
        let div = 1usize << self.channels.len();
        (self.height / div, self.width / div)
    }

    fn frame_shape(&self) -> [usize; 3] {
        [self.bands, self.height, self.width]
    }
}

#[derive(Debug, Clone)]
struct ConvLayer {
    kernel: ParamId,
    bias: ParamId,
    stride: usize,
    pad: usize,
}

impl ConvLayer {
    #[allow(clippy::too_many_arguments)]
    fn new(store: &mut ParamStore, prefix: &str, c_in: usize, c_out: usize, k: usize, stride: usize, pad: usize, gain: f64, rng: &mut Rng) -> Result<Self> {
        let kernel = init_weight(store, &format!("{prefix}.k"), &[c_out, c_in, k, k], c_in * k * k, gain, rng)?;
        let bias = init_zeros(store, &format!("{prefix}.b"), &[c_out])?;
        Ok(Self { kernel, bias, stride, pad })
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let k = tape.param(store, self.kernel);
        let b = tape.param(store, self.bias);
        tape.conv2d(x, k, b, self.stride, self.pad)
    }
}

/// Frame `[B,H,W]` to a `[1, latent]` vector in `(-1, 1)`.
#[derive(Debug, Clone)]
pub struct ConvEncoder {
    pub spec: ConvCoderSpec,
    convs: Vec<ConvLayer>,
    fc: Linear,
}

impl ConvEncoder {
    pub fn new(store: &mut ParamStore, prefix: &str, spec: ConvCoderSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let mut convs = Vec::new();
        let mut c_in = spec.bands;
        for (i, &c) in spec.channels.iter().enumerate() {
            convs.push(ConvLayer::new(store, &format!("{prefix}.conv{i}"), c_in, c, 4, 2, 1, leaky_gain(), rng)?);
            c_in = c;
        }
        let (bh, bw) = spec.bottleneck();
        let fc = Linear::new(store, &format!("{prefix}.fc"), c_in * bh * bw, spec.latent, rng)?;
        Ok(Self { spec, convs, fc })
    }

    pub fn encode(&self, tape: &mut Tape, store: &ParamStore, frame: Var) -> Result<Var> {
        if tape.value(frame).shape() != self.spec.frame_shape() {
            return Err(Error::Shape {
                op: "encode_frame",
                lhs: tape.value(frame).shape().to_vec(),
                rhs: self.spec.frame_shape().to_vec(),
            });
        }
        let mut h = frame;
        for conv in &self.convs {
            h = conv.forward(tape, store, h)?;
            h = tape.leaky_relu(h, LEAKY_SLOPE)?;
        }
        let n = tape.value(h).len();
        let flat = tape.reshape(h, &[1, n])?;
        let out = self.fc.forward(tape, store, flat)?;
        tape.tanh(out)
    }
}

/// `[1, in_width]` latent code to a `[B,H,W]` frame in `(0, 1)`.
#[derive(Debug, Clone)]
pub struct ConvDecoder {
    pub spec: ConvCoderSpec,
    pub in_width: usize,
    fc: Linear,
    convs: Vec<ConvLayer>,
}

impl ConvDecoder {
    pub fn new(store: &mut ParamStore, prefix: &str, spec: ConvCoderSpec, in_width: usize, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let (bh, bw) = spec.bottleneck();
        let top = *spec.channels.last().unwrap();
        let fc = Linear::with_gain(store, &format!("{prefix}.fc"), in_width, top * bh * bw, leaky_gain(), rng)?;
        let mut convs = Vec::new();
        let n = spec.channels.len();
        for i in (0..n).rev() {
            let c_in = spec.channels[i];
            let c_out = if i == 0 { spec.bands } else { spec.channels[i - 1] };
            // the last stage feeds the output sigmoid
            let gain = if i == 0 { 1.0 } else { leaky_gain() };
            convs.push(ConvLayer::new(store, &format!("{prefix}.conv{}", n - 1 - i), c_in, c_out, 3, 1, 1, gain, rng)?);
        }
        Ok(Self { spec, in_width, fc, convs })
    }

    pub fn decode(&self, tape: &mut Tape, store: &ParamStore, code: Var) -> Result<Var> {
        let (bh, bw) = self.spec.bottleneck();
        let top = *self.spec.channels.last().unwrap();
        let h = self.fc.forward(tape, store, code)?;
        let h = tape.reshape(h, &[top, bh, bw])?;
        let mut h = tape.leaky_relu(h, LEAKY_SLOPE)?;
        let last = self.convs.len() - 1;
        for (i, conv) in self.convs.iter().enumerate() {
            h = tape.upsample2(h)?;
            h = conv.forward(tape, store, h)?;
            h = if i == last { tape.sigmoid(h)? } else { tape.leaky_relu(h, LEAKY_SLOPE)? };
        }
        Ok(h)
    }
}
