//! CSV reports and graymap panels.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::io::Write;
use std::path::Path;

use lrvp_core::eval::{MetricReport, RefineRow, SampleScore};
use lrvp_core::training::StepMetrics;
use lrvp_core::video::VideoTensor;

use crate::error::{format_err, io_err, Result};

fn num(x: f64) -> String {
    format!("{x}")
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(io_err(path))
}

pub const METRICS_HEADER: [&str; 6] = ["step", "recon", "kl_y0", "kl_z", "penalty", "total"];

/// Appends rows to a metrics log `step,recon,kl_y0,kl_z,penalty,total`.
pub struct MetricsLog {
    w: csv::Writer<std::fs::File>,
    path: std::path::PathBuf,
}

impl MetricsLog {
    pub fn create(path: &Path) -> Result<Self> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(METRICS_HEADER)?;
        Ok(Self { w, path: path.to_path_buf() })
    }

    pub fn push(&mut self, m: &StepMetrics) -> Result<()> {
        let l = &m.loss;
        self.w.write_record([m.step.to_string(), num(l.recon), num(l.kl_y0), num(l.kl_z), num(l.penalty), num(l.total)])?;
        Ok(())
    }

    pub fn close(self) -> Result<()> {
        finish(self.w, &self.path)
    }
}

/// Writes the evaluation report files into `dir`:
///
/// - `scores.csv`: `sequence,sample,frame,psnr,ssim` for every forecast frame
///   (`frame` counts from the start of the video);
/// - `best.csv`: per-sequence winners and the copy-last scores;
/// - `curves.csv`: per-frame means of the winning samples and of copy-last;
/// - `summary.csv`: `metric,value` aggregates.
pub fn write_evaluation(dir: &Path, report: &MetricReport, baseline: &[SampleScore], n_cond: usize) -> Result<()> {
    let samples = report.sequences.first().map_or(0, |s| s.samples.len());
    let path = dir.join("scores.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["sequence", "sample", "frame", "psnr", "ssim"])?;
    for s in &report.sequences {
        for sc in &s.samples {
            for t in 0..report.horizon {
                w.write_record([s.sequence.to_string(), sc.sample.to_string(), (n_cond + t).to_string(), num(sc.psnr[t]), num(sc.ssim[t])])?;
            }
        }
    }
    finish(w, &path)?;

    let path = dir.join("best.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["sequence", "best_psnr_sample", "best_psnr", "best_ssim_sample", "best_ssim", "copy_last_psnr", "copy_last_ssim"])?;
    for (s, b) in report.sequences.iter().zip(baseline) {
        w.write_record([
            s.sequence.to_string(),
            s.best_psnr_sample.to_string(),
            num(s.best_psnr()),
            s.best_ssim_sample.to_string(),
            num(s.best_ssim()),
            num(b.mean_psnr()),
            num(b.mean_ssim()),
        ])?;
    }
    finish(w, &path)?;

    let agg = report.aggregate();
    let n = baseline.len() as f64;
    let path = dir.join("curves.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["frame", "psnr", "ssim", "copy_last_psnr", "copy_last_ssim"])?;
    for t in 0..report.horizon {
        let bp = baseline.iter().map(|b| b.psnr[t]).sum::<f64>() / n;
        let bs = baseline.iter().map(|b| b.ssim[t]).sum::<f64>() / n;
        w.write_record([(n_cond + t).to_string(), num(agg.psnr_curve[t]), num(agg.ssim_curve[t]), num(bp), num(bs)])?;
    }
    finish(w, &path)?;

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["metric", "value"])?;
    let rows = [
        ("sequences", report.sequences.len().to_string()),
        ("samples", samples.to_string()),
        ("horizon", report.horizon.to_string()),
        ("mean_best_psnr", num(agg.mean_best_psnr)),
        ("mean_best_ssim", num(agg.mean_best_ssim)),
        ("copy_last_psnr", num(baseline.iter().map(|b| b.mean_psnr()).sum::<f64>() / n)),
        ("copy_last_ssim", num(baseline.iter().map(|b| b.mean_ssim()).sum::<f64>() / n)),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()])?;
    }
    finish(w, &path)
}

pub fn write_refine(path: &Path, rows: &[RefineRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["substeps", "frames", "dense_frames", "mean_best_psnr", "mean_best_ssim", "delta_psnr", "delta_ssim"])?;
    for r in rows {
        w.write_record([
            r.substeps.to_string(),
            r.frames.to_string(),
            r.dense_frames.to_string(),
            num(r.mean_best_psnr),
            num(r.mean_best_ssim),
            num(r.delta_psnr),
            num(r.delta_ssim),
        ])?;
    }
    finish(w, path)
}

/// Binary 8-bit graymap of a row-major `[height, width]` image with values in `[0, 1]`.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[f64]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(format_err(format!("{} pixels for a {width}x{height} image", pixels.len())));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&out).map_err(io_err(path))
}

/// Panel with one row per video and one column per frame, for every band stacked vertically.
///
/// All videos must share their dimensions.
pub fn panel(videos: &[&VideoTensor]) -> Result<(usize, usize, Vec<f64>)> {
    let first = videos.first().ok_or_else(|| format_err("panel needs at least one video"))?;
    let [t, b, h, w] = first.dims();
    if videos.iter().any(|v| v.dims() != first.dims()) {
        return Err(format_err("panel videos differ in shape"));
    }
    let (pw, ph) = (t * w, b * videos.len() * h);
    let mut px = vec![0.0; pw * ph];
    for band in 0..b {
        for (vi, v) in videos.iter().enumerate() {
            for f in 0..t {
                let frame = &v.frame_data(f)[band * h * w..(band + 1) * h * w];
                for r in 0..h {
                    let row = (band * videos.len() + vi) * h + r;
                    px[row * pw + f * w..row * pw + (f + 1) * w].copy_from_slice(&frame[r * w..(r + 1) * w]);
                }
            }
        }
    }
    Ok((pw, ph, px))
}
