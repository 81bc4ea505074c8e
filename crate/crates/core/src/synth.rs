//! Moving Gaussian blobs: a seedable stochastic toy video source.

use alloc::format;
use alloc::vec::Vec;

use core::f64::consts::TAU;

use rand::Rng as _;

use crate::error::{invalid, Result};
use crate::rng::rng_from;
use crate::video::VideoTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSceneSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub blobs: usize,
    /// Gaussian radius in pixels; blobs are cut off at three radii.
    pub radius: f64,
    /// Pixels per frame.
    pub speed: f64,
    /// Chance of picking a fresh direction before each move.
    pub p_turn: f64,
    pub frames: usize,
}

impl Default for BlobSceneSpec {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            bands: 1,
            blobs: 2,
            radius: 12.0,
            speed: 6.0,
            p_turn: 0.1,
            frames: 12,
        }
    }
}

impl BlobSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 || self.bands == 0 || self.frames == 0 {
            return Err(invalid(format!("scene needs at least 2x2 pixels, 1 band and 1 frame: {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.p_turn) {
            return Err(invalid(format!("p_turn {} outside [0, 1]", self.p_turn)));
        }
        if !(self.radius > 0.0) || !(self.speed >= 0.0) || !self.speed.is_finite() {
            return Err(invalid("radius must be positive and speed finite and non-negative"));
        }
        let span = (self.height.min(self.width) - 1) as f64;
        if self.speed >= span {
            return Err(invalid(format!("speed {} must be below the frame span {span}", self.speed)));
        }
        Ok(())
    }
}

/// Reflects `x` into `[0, span]` as if bouncing off both walls.
pub fn fold(x: f64, span: f64) -> f64 {
    let period = 2.0 * span;
    let m = x.rem_euclid(period);
    if m <= span {
        m
    } else {
        period - m
    }
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    row: f64,
    col: f64,
    v_row: f64,
    v_col: f64,
}

fn bounce(x: &mut f64, v: &mut f64, span: f64) {
    *x += *v;
    if *x < 0.0 {
        *x = -*x;
        *v = -*v;
    } else if *x > span {
        *x = 2.0 * span - *x;
        *v = -*v;
    }
}

/// Renders blob centres `(row, col)` into one `[H, W]` band, clipped to `[0, 1]`.
pub fn render(centres: &[(f64, f64)], height: usize, width: usize, radius: f64) -> Vec<f64> {
    let mut out = alloc::vec![0.0; height * width];
    let cutoff = 3.0 * radius;
    let inv = 1.0 / (2.0 * radius * radius);
    for &(cr, cc) in centres {
        let r_lo = libm::floor(cr - cutoff).max(0.0) as usize;
        let r_hi = (libm::ceil(cr + cutoff) as usize).min(height - 1);
        let c_lo = libm::floor(cc - cutoff).max(0.0) as usize;
        let c_hi = (libm::ceil(cc + cutoff) as usize).min(width - 1);
        for r in r_lo..=r_hi {
            for c in c_lo..=c_hi {
                let d2 = (r as f64 - cr) * (r as f64 - cr) + (c as f64 - cc) * (c as f64 - cc);
                if d2 <= cutoff * cutoff {
                    out[r * width + c] += libm::exp(-d2 * inv);
                }
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.min(1.0));
    out
}

/// Initial blob centres and velocities drawn for `seed` (used by the kinematics tests).
pub fn initial_state(spec: &BlobSceneSpec, seed: u64) -> Vec<((f64, f64), (f64, f64))> {
    let mut rng = rng_from(seed);
    init_blobs(spec, &mut rng)
        .into_iter()
        .map(|b| ((b.row, b.col), (b.v_row, b.v_col)))
        .collect()
}

fn init_blobs(spec: &BlobSceneSpec, rng: &mut crate::rng::Rng) -> Vec<Blob> {
    let (h_span, w_span) = ((spec.height - 1) as f64, (spec.width - 1) as f64);
    (0..spec.blobs)
        .map(|_| {
            let row = rng.random::<f64>() * h_span;
            let col = rng.random::<f64>() * w_span;
            let theta = rng.random::<f64>() * TAU;
            Blob {
                row,
                col,
                v_row: spec.speed * libm::sin(theta),
                v_col: spec.speed * libm::cos(theta),
            }
        })
        .collect()
}

/// One sequence; identical across bands.
pub fn gen_sequence(spec: &BlobSceneSpec, seed: u64) -> Result<VideoTensor> {
    spec.validate()?;
    let mut rng = rng_from(seed);
    let mut blobs = init_blobs(spec, &mut rng);
    let (h_span, w_span) = ((spec.height - 1) as f64, (spec.width - 1) as f64);
    let plane = spec.height * spec.width;
    let mut data = Vec::with_capacity(spec.frames * spec.bands * plane);
    for t in 0..spec.frames {
        if t > 0 {
            for b in &mut blobs {
                if rng.random::<f64>() < spec.p_turn {
                    let theta = rng.random::<f64>() * TAU;
                    b.v_row = spec.speed * libm::sin(theta);
                    b.v_col = spec.speed * libm::cos(theta);
                }
                bounce(&mut b.row, &mut b.v_row, h_span);
                bounce(&mut b.col, &mut b.v_col, w_span);
            }
        }
        let centres: Vec<(f64, f64)> = blobs.iter().map(|b| (b.row, b.col)).collect();
        let frame = render(&centres, spec.height, spec.width, spec.radius);
        for _ in 0..spec.bands {
            data.extend_from_slice(&frame);
        }
    }
    VideoTensor::new([spec.frames, spec.bands, spec.height, spec.width], data)
}

/// `n` sequences with seeds `seed, seed + 1, ...`.
pub fn gen_dataset(spec: &BlobSceneSpec, n: usize, seed: u64) -> Result<Vec<VideoTensor>> {
    if n == 0 {
        return Err(invalid("dataset needs at least one sequence"));
    }
    (0..n).map(|i| gen_sequence(spec, seed.wrapping_add(i as u64))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_matches_iterated_bounce() {
        let span = 10.0;
        let (mut x, mut v) = (3.5, 2.75);
        for t in 1..200 {
            bounce(&mut x, &mut v, span);
            let closed = fold(3.5 + 2.75 * t as f64, span);
            assert!((x - closed).abs() < 1e-9, "t={t}: {x} vs {closed}");
        }
    }

    #[test]
    fn values_in_unit_interval_and_seeded() {
        let spec = BlobSceneSpec { blobs: 5, ..BlobSceneSpec::default() };
        let a = gen_sequence(&spec, 4).unwrap();
        assert!(a.in_unit_interval());
        assert_eq!(a, gen_sequence(&spec, 4).unwrap());
        assert_ne!(a, gen_sequence(&spec, 5).unwrap());
    }

    #[test]
    fn rejects_bad_spec() {
        let bad = BlobSceneSpec { p_turn: 1.5, ..BlobSceneSpec::default() };
        assert!(gen_sequence(&bad, 0).is_err());
        assert!(gen_dataset(&BlobSceneSpec::default(), 0, 0).is_err());
    }
}
