//! Archive download into a local cache.
//!
//! Each expected object is stored under `sha256(url)` in the cache directory,
//! so re-runs skip everything already present. Downloads go to a `.part` file
//! that is renamed on success.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use lrvp_core::goes::{FetchEntry, FetchWindow};
use sha2::{Digest, Sha256};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchStatus {
    Cached,
    Downloaded,
    /// Dry run: not cached and not requested.
    Planned,
    Failed(String),
}

impl FetchStatus {
    pub fn label(&self) -> &str {
        match self {
            FetchStatus::Cached => "cached",
            FetchStatus::Downloaded => "downloaded",
            FetchStatus::Planned => "planned",
            FetchStatus::Failed(_) => "failed",
        }
    }

    pub fn available(&self) -> bool {
        matches!(self, FetchStatus::Cached | FetchStatus::Downloaded)
    }
}

#[derive(Debug, Clone)]
pub struct FetchRecord {
    pub entry: FetchEntry,
    pub path: PathBuf,
    pub status: FetchStatus,
}

#[derive(Debug, Clone)]
pub struct FetchReport {
    pub expected_per_band: u64,
    pub bands: Vec<u8>,
    pub records: Vec<FetchRecord>,
}

impl FetchReport {
    pub fn available(&self, band: u8) -> u64 {
        self.records.iter().filter(|r| r.entry.band == band && r.status.available()).count() as u64
    }

    pub fn downloaded(&self) -> usize {
        self.records.iter().filter(|r| r.status == FetchStatus::Downloaded).count()
    }

    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| matches!(r.status, FetchStatus::Failed(_))).count()
    }

    /// Writes `fetch_report.csv` (one row per object) and `fetch_summary.csv` (per band).
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("fetch_report.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["band", "day", "hour", "minute", "url", "path", "status", "detail"])?;
        for r in &self.records {
            let detail = match &r.status {
                FetchStatus::Failed(e) => e.as_str(),
                _ => "",
            };
            let e = &r.entry;
            w.write_record([
                e.band.to_string(),
                e.day.to_string(),
                e.hour.to_string(),
                e.minute.to_string(),
                e.url.clone(),
                r.path.display().to_string(),
                r.status.label().to_string(),
                detail.to_string(),
            ])?;
        }
        w.flush().map_err(io_err(&path))?;
        let path = dir.join("fetch_summary.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["band", "expected", "available"])?;
        for &b in &self.bands {
            w.write_record([b.to_string(), self.expected_per_band.to_string(), self.available(b).to_string()])?;
        }
        w.flush().map_err(io_err(&path))
    }
}

/// Cache location of `url`.
pub fn cache_path(cache: &Path, url: &str) -> PathBuf {
    cache.join(format!("{}.bin", hex::encode(Sha256::digest(url.as_bytes()))))
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub retries: u32,
    pub retry_delay: Duration,
    pub timeout: Duration,
    pub dry_run: bool,
}

fn download(agent: &ureq::Agent, url: &str, dest: &Path) -> std::result::Result<(), String> {
    let mut resp = agent.get(url).call().map_err(|e| e.to_string())?;
    let part = dest.with_extension("part");
    let mut file = std::fs::File::create(&part).map_err(|e| format!("{}: {e}", part.display()))?;
    let copied = std::io::copy(&mut resp.body_mut().as_reader(), &mut file).and_then(|_| file.flush());
    if let Err(e) = copied {
        let _ = std::fs::remove_file(&part);
        return Err(e.to_string());
    }
    std::fs::rename(&part, dest).map_err(|e| format!("{}: {e}", dest.display()))
}

/// Fetches every object of `window` not yet in `cache`.
///
/// Failed objects are retried `retries` times and then recorded in the
/// report; they do not stop the remaining downloads.
pub fn fetch(window: &FetchWindow, template: &str, cache: &Path, opts: &FetchOptions) -> Result<FetchReport> {
    let entries = window.entries(template)?;
    std::fs::create_dir_all(cache).map_err(io_err(cache))?;
    let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(opts.timeout)).build().into();
    let mut records = Vec::with_capacity(entries.len());
    for entry in entries {
        let path = cache_path(cache, &entry.url);
        let status = if path.exists() {
            FetchStatus::Cached
        } else if opts.dry_run {
            FetchStatus::Planned
        } else {
            let mut attempt = 0;
            loop {
                match download(&agent, &entry.url, &path) {
                    Ok(()) => break FetchStatus::Downloaded,
                    Err(e) if attempt >= opts.retries => {
                        log::warn!("giving up on {}: {e}", entry.url);
                        break FetchStatus::Failed(e);
                    }
                    Err(e) => {
                        attempt += 1;
                        log::debug!("retry {attempt} for {}: {e}", entry.url);
                        std::thread::sleep(opts.retry_delay * attempt);
                    }
                }
            }
        };
        records.push(FetchRecord { entry, path, status });
    }
    Ok(FetchReport {
        expected_per_band: window.expected_per_band(),
        bands: window.bands.clone(),
        records,
    })
}

/// Logs per-band count mismatches and turns download failures into an error.
pub fn check_report(report: &FetchReport) -> Result<()> {
    for &b in &report.bands {
        let got = report.available(b);
        if got != report.expected_per_band {
            log::warn!(
                "band {b}: {got} of {} expected slices available (the 2022 day 80-135, 05-12 UTC window expects {} per band)",
                report.expected_per_band,
                FetchWindow::default().expected_per_band()
            );
        }
    }
    match report.failed() {
        0 => Ok(()),
        n => Err(Error::Network(format!("{n} of {} downloads failed; see fetch_report.csv", report.records.len()))),
    }
}
