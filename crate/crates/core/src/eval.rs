//! Frame metrics and the best-of-N forecasting protocol.
//!
//! Scores are averaged over predicted frames only. The best sample is picked
//! separately for PSNR and SSIM, and `+inf` PSNR (identical frames) sorts above
//! every finite score.

use alloc::format;
use alloc::vec::Vec;

use crate::diff::{ParamStore, Tensor};
use crate::dynamics::{Conditioning, Model};
use crate::error::{invalid, Error, Result};
use crate::exec::Executor;
use crate::rng::{self, derive_seed};
use crate::video::VideoTensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn check_same(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::Shape {
            op,
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        });
    }
    Ok(())
}

/// Peak-1 PSNR in dB over all bands and pixels; `f64::INFINITY` for identical frames.
pub fn psnr(a: &Tensor, b: &Tensor) -> Result<f64> {
    check_same("psnr", a.shape(), b.shape())?;
    let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * libm::log10(mse))
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, t) in w.iter_mut().enumerate() {
        let x = i as f64 - half;
        *t = libm::exp(-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|t| *t /= s);
    w
}

/// Separable valid-mode weighted average of a `[h, w]` plane.
fn filter_valid(x: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = alloc::vec![0.0; h * ow];
    for r in 0..h {
        let line = &x[r * w..(r + 1) * w];
        for c in 0..ow {
            rows[r * ow + c] = taps.iter().zip(&line[c..c + SSIM_WINDOW]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = alloc::vec![0.0; oh * ow];
    for r in 0..oh {
        for (k, t) in taps.iter().enumerate() {
            let src = &rows[(r + k) * ow..(r + k + 1) * ow];
            for (o, s) in out[r * ow..(r + 1) * ow].iter_mut().zip(src) {
                *o += t * s;
            }
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> f64 {
    let prod = |f: &dyn Fn(f64, f64) -> f64| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect::<Vec<_>>();
    let mu_a = filter_valid(a, h, w, taps);
    let mu_b = filter_valid(b, h, w, taps);
    let aa = filter_valid(&prod(&|x, _| x * x), h, w, taps);
    let bb = filter_valid(&prod(&|_, y| y * y), h, w, taps);
    let ab = filter_valid(&prod(&|x, y| x * y), h, w, taps);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
    total / n as f64
}

/// Mean local SSIM of `[B, H, W]` frames (11x11 Gaussian window, sigma 1.5),
/// computed per band and averaged.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    check_same("ssim", a.shape(), b.shape())?;
    let s = a.shape();
    let (bands, h, w) = match *s {
        [h, w] => (1, h, w),
        [bands, h, w] => (bands, h, w),
        _ => return Err(invalid(format!("ssim expects [B,H,W] frames, got {s:?}"))),
    };
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(invalid(format!("frame {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")));
    }
    let taps = gaussian_taps();
    let plane = h * w;
    let total: f64 = (0..bands)
        .map(|k| ssim_plane(&a.data()[k * plane..(k + 1) * plane], &b.data()[k * plane..(k + 1) * plane], h, w, &taps))
        .sum();
    Ok(total / bands as f64)
}

/// Per-frame scores of one forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleScore {
    pub sample: usize,
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
}

impl SampleScore {
    pub fn mean_psnr(&self) -> f64 {
        mean(&self.psnr)
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(&self.ssim)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Scores predicted frames against ground truth frame by frame.
pub fn score_frames(pred: &VideoTensor, truth: &VideoTensor, sample: usize) -> Result<SampleScore> {
    check_same("score_frames", &pred.dims(), &truth.dims())?;
    if pred.is_empty() {
        return Err(invalid("nothing to score"));
    }
    let mut out = SampleScore {
        sample,
        psnr: Vec::with_capacity(pred.len()),
        ssim: Vec::with_capacity(pred.len()),
    };
    for t in 0..pred.len() {
        let (p, g) = (pred.frame(t), truth.frame(t));
        out.psnr.push(psnr(&p, &g)?);
        out.ssim.push(ssim(&p, &g)?);
    }
    Ok(out)
}

/// All samples of one sequence plus the per-metric winners.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceReport {
    pub sequence: usize,
    pub samples: Vec<SampleScore>,
    pub best_psnr_sample: usize,
    pub best_ssim_sample: usize,
}

impl SequenceReport {
    pub fn from_samples(sequence: usize, samples: Vec<SampleScore>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("best-of-n needs n >= 1"));
        }
        let pick = |f: &dyn Fn(&SampleScore) -> f64| {
            // first sample wins ties so smaller nested sets agree
            let mut best = 0;
            for (i, s) in samples.iter().enumerate().skip(1) {
                if f(s).total_cmp(&f(&samples[best])).is_gt() {
                    best = i;
                }
            }
            best
        };
        let best_psnr_sample = pick(&|s| s.mean_psnr());
        let best_ssim_sample = pick(&|s| s.mean_ssim());
        Ok(Self {
            sequence,
            samples,
            best_psnr_sample,
            best_ssim_sample,
        })
    }

    pub fn best_psnr(&self) -> f64 {
        self.samples[self.best_psnr_sample].mean_psnr()
    }

    pub fn best_ssim(&self) -> f64 {
        self.samples[self.best_ssim_sample].mean_ssim()
    }

    /// Report restricted to the first `n` samples.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        Self::from_samples(self.sequence, self.samples[..n.min(self.samples.len())].to_vec())
    }
}

/// Forecasting setup shared by all sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Protocol {
    pub samples: usize,
    pub substeps: usize,
    pub seed: u64,
}

/// Seed of forecast `sample` for sequence `sequence`; sets for smaller `n` nest.
pub fn sample_seed(seed: u64, sequence: usize, sample: usize) -> u64 {
    derive_seed(seed, &[rng::stream::SAMPLE, sequence as u64, sample as u64])
}

fn split(seq: &VideoTensor, n_cond: usize) -> Result<(VideoTensor, VideoTensor)> {
    if seq.len() < n_cond + 1 {
        return Err(invalid(format!("sequence of {} frames needs at least n_cond + 1 = {}", seq.len(), n_cond + 1)));
    }
    Ok((seq.frames(0, n_cond)?, seq.frames(n_cond, seq.len())?))
}

/// Best-of-n evaluation of one sequence.
pub fn best_of_n<E: Executor>(model: &Model, store: &ParamStore, seq: &VideoTensor, sequence: usize, proto: &Protocol, exec: &E) -> Result<SequenceReport> {
    let report = evaluate_inner(model, store, core::slice::from_ref(seq), sequence, proto, exec, &mut |_, _, _| Ok(()))?;
    Ok(report.sequences.into_iter().next().unwrap())
}

/// Scores of every sequence; curves and aggregates derive from it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub horizon: usize,
    pub sequences: Vec<SequenceReport>,
}

/// Mean best scores plus per-frame curves of the winning samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean_best_psnr: f64,
    pub mean_best_ssim: f64,
    pub psnr_curve: Vec<f64>,
    pub ssim_curve: Vec<f64>,
}

impl MetricReport {
    pub fn aggregate(&self) -> Aggregate {
        let n = self.sequences.len() as f64;
        let mut psnr_curve = alloc::vec![0.0; self.horizon];
        let mut ssim_curve = alloc::vec![0.0; self.horizon];
        for s in &self.sequences {
            let bp = &s.samples[s.best_psnr_sample];
            let bs = &s.samples[s.best_ssim_sample];
            for t in 0..self.horizon {
                psnr_curve[t] += bp.psnr[t] / n;
                ssim_curve[t] += bs.ssim[t] / n;
            }
        }
        Aggregate {
            mean_best_psnr: self.sequences.iter().map(|s| s.best_psnr()).sum::<f64>() / n,
            mean_best_ssim: self.sequences.iter().map(|s| s.best_ssim()).sum::<f64>() / n,
            psnr_curve,
            ssim_curve,
        }
    }

    pub fn truncated(&self, n: usize) -> Result<Self> {
        Ok(Self {
            horizon: self.horizon,
            sequences: self.sequences.iter().map(|s| s.truncated(n)).collect::<Result<_>>()?,
        })
    }
}

/// Best-of-n over a dataset; work is spread over `(sequence, sample)` pairs.
pub fn evaluate<E: Executor>(model: &Model, store: &ParamStore, seqs: &[VideoTensor], proto: &Protocol, exec: &E) -> Result<MetricReport> {
    evaluate_with_forecasts(model, store, seqs, proto, exec, |_, _, _| Ok(()))
}

/// Like [`evaluate`], also handing each forecast to `sink(sequence, sample, frames)`
/// in index order.
pub fn evaluate_with_forecasts<E: Executor, F>(
    model: &Model,
    store: &ParamStore,
    seqs: &[VideoTensor],
    proto: &Protocol,
    exec: &E,
    mut sink: F,
) -> Result<MetricReport>
where
    F: FnMut(usize, usize, &VideoTensor) -> Result<()>,
{
    evaluate_inner(model, store, seqs, 0, proto, exec, &mut sink)
}

/// Sequence `i` of `seqs` is scored and seeded as sequence `first + i`.
fn evaluate_inner<E: Executor>(
    model: &Model,
    store: &ParamStore,
    seqs: &[VideoTensor],
    first: usize,
    proto: &Protocol,
    exec: &E,
    sink: &mut dyn FnMut(usize, usize, &VideoTensor) -> Result<()>,
) -> Result<MetricReport> {
    if proto.samples == 0 {
        return Err(invalid("best-of-n needs n >= 1"));
    }
    if seqs.is_empty() {
        return Err(invalid("no sequences to evaluate"));
    }
    let n_cond = model.cfg.n_cond;
    let parts = seqs.iter().map(|s| split(s, n_cond)).collect::<Result<Vec<_>>>()?;
    let horizon = parts[0].1.len();
    if parts.iter().any(|(_, t)| t.len() != horizon) {
        return Err(invalid("all evaluation sequences must have the same length"));
    }
    let contexts: Vec<Result<Conditioning>> = exec.map(parts.len(), |i| model.condition(store, &parts[i].0));
    let contexts = contexts.into_iter().collect::<Result<Vec<_>>>()?;
    let n = proto.samples;
    let results = exec.map(parts.len() * n, |k| -> Result<(VideoTensor, SampleScore)> {
        let (i, s) = (k / n, k % n);
        let g = model.sample_future(store, &contexts[i], horizon, proto.substeps, sample_seed(proto.seed, first + i, s))?;
        let score = score_frames(&g.frames, &parts[i].1, s)?;
        Ok((g.frames, score))
    });
    let mut sequences = Vec::with_capacity(parts.len());
    let mut it = results.into_iter();
    for i in 0..parts.len() {
        let mut samples = Vec::with_capacity(n);
        for s in 0..n {
            let (frames, score) = it.next().unwrap()?;
            sink(first + i, s, &frames)?;
            samples.push(score);
        }
        sequences.push(SequenceReport::from_samples(first + i, samples)?);
    }
    Ok(MetricReport { horizon, sequences })
}

/// Predicts every future frame as the last conditioning frame.
pub fn copy_last_baseline(seq: &VideoTensor, n_cond: usize) -> Result<SampleScore> {
    if n_cond == 0 {
        return Err(invalid("copy-last needs at least one conditioning frame"));
    }
    let (cond, truth) = split(seq, n_cond)?;
    let last = cond.frame(n_cond - 1);
    let frames: Vec<Tensor> = (0..truth.len()).map(|_| last.clone()).collect();
    let pred = VideoTensor::from_frames(&frames, seq.frame_dims())?;
    score_frames(&pred, &truth, 0)
}

/// One row of the sub-step refinement table.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineRow {
    pub substeps: usize,
    pub mean_best_psnr: f64,
    pub mean_best_ssim: f64,
    /// Differences to the first row.
    pub delta_psnr: f64,
    pub delta_ssim: f64,
    pub frames: usize,
    pub dense_frames: usize,
}

/// Re-runs the protocol with each sub-step count and the same seeds.
pub fn refine_study<E: Executor>(model: &Model, store: &ParamStore, seqs: &[VideoTensor], substeps_list: &[usize], samples: usize, seed: u64, exec: &E) -> Result<Vec<RefineRow>> {
    if substeps_list.is_empty() {
        return Err(invalid("refine study needs at least one sub-step count"));
    }
    let mut rows: Vec<RefineRow> = Vec::with_capacity(substeps_list.len());
    for &substeps in substeps_list {
        let proto = Protocol { samples, substeps, seed };
        let report = evaluate(model, store, seqs, &proto, exec)?;
        let agg = report.aggregate();
        let (cond, _) = split(&seqs[0], model.cfg.n_cond)?;
        let ctx = model.condition(store, &cond)?;
        let g = model.sample_future(store, &ctx, report.horizon, substeps, sample_seed(seed, 0, 0))?;
        let dense = model.decode_dense(store, &g.trajectory, &g.content)?;
        let (d_psnr, d_ssim) = match rows.first() {
            Some(r) => (agg.mean_best_psnr - r.mean_best_psnr, agg.mean_best_ssim - r.mean_best_ssim),
            None => (0.0, 0.0),
        };
        rows.push(RefineRow {
            substeps,
            mean_best_psnr: agg.mean_best_psnr,
            mean_best_ssim: agg.mean_best_ssim,
            delta_psnr: d_psnr,
            delta_ssim: d_ssim,
            frames: g.frames.len(),
            dense_frames: dense.len(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn psnr_examples() {
        let a = Tensor::new(vec![1, 2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = Tensor::new(vec![1, 2, 2], vec![0.2, 0.3, 0.4, 0.5]).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let c = Tensor::zeros(&[1, 4, 1]);
        assert!(psnr(&a, &c).is_err());
    }

    #[test]
    fn ssim_identity_and_window_size() {
        let data: Vec<f64> = (0..16 * 16).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let a = Tensor::new(vec![1, 16, 16], data).unwrap();
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let small = Tensor::zeros(&[1, 10, 16]);
        assert!(ssim(&small, &small).is_err());
    }

    #[test]
    fn best_sample_per_metric() {
        let a = SampleScore { sample: 0, psnr: vec![10.0, 12.0], ssim: vec![0.9, 0.9] };
        let b = SampleScore { sample: 1, psnr: vec![f64::INFINITY, 11.0], ssim: vec![0.5, 0.6] };
        let r = SequenceReport::from_samples(0, vec![a, b]).unwrap();
        assert_eq!(r.best_psnr_sample, 1);
        assert_eq!(r.best_ssim_sample, 0);
        assert_eq!(r.best_psnr(), f64::INFINITY);
        assert!(SequenceReport::from_samples(0, vec![]).is_err());
    }
}
