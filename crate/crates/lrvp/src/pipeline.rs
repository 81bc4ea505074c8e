//! Slice bundles to packed videos.
//!
//! Bundles are grouped by timestamp; consecutive runs of `frames` timestamps
//! form one video. Each slice is converted to band-7 radiance with the band-7
//! coefficients of its own timestamp, cropped and normalized independently,
//! so slices can be processed on any number of workers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lrvp_core::exec::Executor;
use lrvp_core::goes::{assemble_video, process_slice, ProcessedSlice};
use lrvp_core::Error as CoreError;

use crate::error::{format_err, io_err, Result};
use crate::gslc::{read_header, BundleHeader, SliceBundle};
use crate::lrvv::VideoFile;

#[derive(Debug, Clone)]
pub struct PreprocessOptions {
    pub origin: (usize, usize),
    pub size: usize,
    pub frames: usize,
    pub bands: Vec<u8>,
    pub compress: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoSummary {
    pub path: PathBuf,
    pub timestamps: Vec<i64>,
    pub nan_pixels: u64,
    pub degenerate_slices: usize,
}

/// Headers of every `.gslc` file under `dir`, keyed by `(timestamp, band)`.
pub fn scan_bundles(dir: &Path) -> Result<BTreeMap<(i64, u8), (PathBuf, BundleHeader)>> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let p = entry.map_err(io_err(dir))?.path();
        if p.extension().is_some_and(|e| e == "gslc") {
            paths.push(p);
        }
    }
    paths.sort();
    let mut out = BTreeMap::new();
    for p in paths {
        let h = read_header(&p)?;
        if let Some((prev, _)) = out.insert((h.timestamp, h.band), (p.clone(), h)) {
            return Err(format_err(format!("{} and {} hold the same (timestamp, band)", prev.display(), p.display())));
        }
    }
    Ok(out)
}

/// Converts every complete group of bundles under `input` into `video_NNNN.lrvv` files in `out`.
pub fn preprocess_dir<E: Executor>(input: &Path, out: &Path, opts: &PreprocessOptions, exec: &E) -> Result<Vec<VideoSummary>> {
    if opts.frames == 0 || opts.bands.is_empty() {
        return Err(format_err("need at least one frame and one band per video"));
    }
    let bundles = scan_bundles(input)?;
    let mut timestamps: Vec<i64> = bundles.keys().map(|k| k.0).collect();
    timestamps.dedup();
    let groups = timestamps.len() / opts.frames;
    if !timestamps.len().is_multiple_of(opts.frames) {
        log::warn!(
            "{} trailing timestamps do not fill a {}-frame video and are skipped",
            timestamps.len() % opts.frames,
            opts.frames
        );
    }
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let mut summaries = Vec::with_capacity(groups);
    for (g, stamps) in timestamps.chunks_exact(opts.frames).enumerate() {
        let mut missing = Vec::new();
        let mut jobs = Vec::new();
        for &t in stamps {
            for &b in &opts.bands {
                match bundles.get(&(t, b)) {
                    Some((p, _)) => jobs.push(p.clone()),
                    None => missing.push((t, b)),
                }
            }
            if !bundles.contains_key(&(t, 7)) && !opts.bands.contains(&7) {
                missing.push((t, 7));
            }
        }
        if !missing.is_empty() {
            return Err(CoreError::MissingSlices(missing).into());
        }
        let processed = exec.map(jobs.len(), |i| -> Result<ProcessedSlice> {
            let slice = SliceBundle::read(&jobs[i])?.to_slice()?;
            let band7 = bundles[&(slice.timestamp, 7)].1.coeffs;
            Ok(process_slice(&slice, &band7, opts.origin, opts.size)?)
        });
        let processed = processed.into_iter().collect::<Result<Vec<_>>>()?;
        let degenerate = processed.iter().filter(|s| s.degenerate).count();
        for s in processed.iter().filter(|s| s.degenerate) {
            log::warn!("constant slice (timestamp {}, band {}) normalized to zeros", s.timestamp, s.band);
        }
        let packed = assemble_video(&processed, opts.frames, &opts.bands)?;
        let path = out.join(format!("video_{g:04}.lrvv"));
        VideoFile::from_video(&packed.video, Some(packed.nan_counts.clone()))?.write(&path, opts.compress)?;
        summaries.push(VideoSummary {
            path,
            timestamps: packed.timestamps,
            nan_pixels: packed.nan_counts.iter().map(|&c| c as u64).sum(),
            degenerate_slices: degenerate,
        });
    }
    Ok(summaries)
}
