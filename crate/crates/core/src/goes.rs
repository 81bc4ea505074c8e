//! Infrared satellite slice preprocessing.
//!
//! Each band's radiance is turned into brightness temperature with its own
//! Planck coefficients and then re-expressed as band-7 radiance, cropped, and
//! min/max normalized per slice. Processed slices are stacked into
//! `(T, B, H, W)` videos with bands ordered 7..=16.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::video::VideoTensor;

pub const FIRST_BAND: u8 = 7;
pub const LAST_BAND: u8 = 16;
pub const BANDS: usize = (LAST_BAND - FIRST_BAND + 1) as usize;
pub const FRAMES_PER_VIDEO: usize = 12;
pub const CROP_SIZE: usize = 256;
pub const SCENE_ROWS: usize = 1500;
pub const SCENE_COLS: usize = 2500;
/// Upper-left corner of the default crop, over the southern-central part of the
/// contiguous-US scene.
pub const DEFAULT_CROP_ORIGIN: (usize, usize) = (900, 1100);

/// Planck-function coefficients shipped with each band's product metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanckCoeffs {
    pub fk1: f64,
    pub fk2: f64,
    pub bc1: f64,
    pub bc2: f64,
}

impl PlanckCoeffs {
    pub fn new(fk1: f64, fk2: f64, bc1: f64, bc2: f64) -> Result<Self> {
        let c = Self { fk1, fk2, bc1, bc2 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fk1, self.fk2, self.bc1, self.bc2].iter().all(|v| v.is_finite());
        if !finite || !(self.fk1 > 0.0) || !(self.fk2 > 0.0) || self.bc2 == 0.0 {
            return Err(invalid(format!("invalid Planck coefficients {self:?}")));
        }
        Ok(())
    }
}

/// Brightness temperature of a radiance; NaN when `radiance <= 0` or NaN.
pub fn rad_to_bt(radiance: f64, c: &PlanckCoeffs) -> f64 {
    if !(radiance > 0.0) {
        return f64::NAN;
    }
    (c.fk2 / libm::log1p(c.fk1 / radiance) - c.bc1) / c.bc2
}

/// Radiance of a brightness temperature; NaN when `bt * bc2 + bc1 <= 0`.
pub fn bt_to_rad(bt: f64, c: &PlanckCoeffs) -> f64 {
    let t_eff = bt * c.bc2 + c.bc1;
    if !(t_eff > 0.0) {
        return f64::NAN;
    }
    c.fk1 / libm::expm1(c.fk2 / t_eff)
}

/// Row-major 2-D array of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::Shape {
                op: "grid",
                lhs: alloc::vec![rows, cols],
                rhs: alloc::vec![data.len()],
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// One band at one timestamp, as read from a slice bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceSlice {
    pub band: u8,
    /// Epoch seconds.
    pub timestamp: i64,
    pub coeffs: PlanckCoeffs,
    pub grid: Grid,
}

impl RadianceSlice {
    pub fn validate(&self) -> Result<()> {
        if !(FIRST_BAND..=LAST_BAND).contains(&self.band) {
            return Err(invalid(format!("band {} outside {FIRST_BAND}..={LAST_BAND}", self.band)));
        }
        self.coeffs.validate()
    }
}

/// Grid plus the number of pixels that became NaN during conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct Converted {
    pub grid: Grid,
    pub invalid_pixels: usize,
}

/// Re-expresses a slice as band-7 radiance through its brightness temperature.
pub fn to_band7_radiance(slice: &RadianceSlice, band7: &PlanckCoeffs) -> Result<Converted> {
    slice.validate()?;
    band7.validate()?;
    let own = slice.coeffs;
    let grid = slice.grid.map(|l| bt_to_rad(rad_to_bt(l, &own), band7));
    let invalid_pixels = grid
        .data
        .iter()
        .zip(&slice.grid.data)
        .filter(|(out, src)| out.is_nan() && !src.is_nan())
        .count();
    Ok(Converted { grid, invalid_pixels })
}

/// Normalized grid with the bookkeeping the video sidecar records.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub grid: Grid,
    /// NaN pixels replaced by 0.
    pub nan_count: usize,
    /// True when every finite pixel had the same value (output is all zeros).
    pub degenerate: bool,
}

/// Per-slice nan-aware min/max scaling into `[0, 1]`; NaNs become 0.
pub fn normalize_slice(grid: &Grid, timestamp: i64) -> Result<Normalized> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut nan_count = 0;
    for &v in &grid.data {
        if v.is_nan() {
            nan_count += 1;
        } else {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if nan_count == grid.data.len() {
        return Err(Error::AllNan { timestamp });
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonFinite { op: "normalize_slice" });
    }
    let range = hi - lo;
    let degenerate = range == 0.0;
    let out = grid.map(|v| {
        if v.is_nan() || degenerate {
            0.0
        } else {
            (v - lo) / range
        }
    });
    Ok(Normalized {
        grid: out,
        nan_count,
        degenerate,
    })
}

/// `size x size` window whose upper-left corner is `origin = (row, col)`.
pub fn crop(grid: &Grid, origin: (usize, usize), size: usize) -> Result<Grid> {
    let (r0, c0) = origin;
    if size == 0 || r0 + size > grid.rows || c0 + size > grid.cols {
        return Err(Error::CropBounds {
            row: r0,
            col: c0,
            size,
            rows: grid.rows,
            cols: grid.cols,
        });
    }
    let mut data = Vec::with_capacity(size * size);
    for r in r0..r0 + size {
        let start = r * grid.cols + c0;
        data.extend_from_slice(&grid.data[start..start + size]);
    }
    Grid::new(size, size, data)
}

/// Convert, crop and normalize one slice.
pub fn process_slice(slice: &RadianceSlice, band7: &PlanckCoeffs, origin: (usize, usize), size: usize) -> Result<ProcessedSlice> {
    let converted = to_band7_radiance(slice, band7)?;
    let cropped = crop(&converted.grid, origin, size)?;
    let n = normalize_slice(&cropped, slice.timestamp)?;
    Ok(ProcessedSlice {
        band: slice.band,
        timestamp: slice.timestamp,
        grid: n.grid,
        nan_count: n.nan_count,
        degenerate: n.degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedSlice {
    pub band: u8,
    pub timestamp: i64,
    pub grid: Grid,
    pub nan_count: usize,
    pub degenerate: bool,
}

/// Stacked video with its timestamps and per-`(t, band)` NaN replacement counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedVideo {
    pub video: VideoTensor,
    pub timestamps: Vec<i64>,
    pub nan_counts: Vec<u32>,
}

/// Stacks slices given timestamp-major with bands ascending within each timestamp.
pub fn assemble_video(slices: &[ProcessedSlice], frames: usize, bands: &[u8]) -> Result<PackedVideo> {
    if bands.is_empty() || bands.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("band list must be non-empty and strictly increasing"));
    }
    let mut timestamps: Vec<i64> = Vec::new();
    for s in slices {
        if timestamps.last() != Some(&s.timestamp) {
            if let Some(&prev) = timestamps.last() {
                if s.timestamp < prev {
                    return Err(invalid(format!("timestamps not increasing: {} after {prev}", s.timestamp)));
                }
            }
            timestamps.push(s.timestamp);
        }
    }
    if timestamps.len() != frames {
        return Err(invalid(format!("expected {frames} timestamps, got {}", timestamps.len())));
    }
    let band_pos = |b: u8| bands.iter().position(|&x| x == b);
    let mut prev: Option<(usize, usize)> = None;
    let mut present = alloc::vec![None; frames * bands.len()];
    let mut t_idx = 0;
    for (i, s) in slices.iter().enumerate() {
        while timestamps[t_idx] != s.timestamp {
            t_idx += 1;
        }
        let b = band_pos(s.band).ok_or_else(|| invalid(format!("unexpected band {} at {}", s.band, s.timestamp)))?;
        if let Some(p) = prev {
            if (t_idx, b) <= p {
                return Err(invalid(format!(
                    "slice {i} (t={}, band {}) out of band order or duplicated",
                    s.timestamp, s.band
                )));
            }
        }
        prev = Some((t_idx, b));
        present[t_idx * bands.len() + b] = Some(i);
    }
    let missing: Vec<(i64, u8)> = present
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_none())
        .map(|(k, _)| (timestamps[k / bands.len()], bands[k % bands.len()]))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSlices(missing));
    }
    let (h, w) = (slices[0].grid.rows, slices[0].grid.cols);
    let mut data = Vec::with_capacity(slices.len() * h * w);
    let mut nan_counts = Vec::with_capacity(slices.len());
    for s in slices {
        if (s.grid.rows, s.grid.cols) != (h, w) {
            return Err(Error::Shape {
                op: "assemble_video",
                lhs: alloc::vec![s.grid.rows, s.grid.cols],
                rhs: alloc::vec![h, w],
            });
        }
        data.extend_from_slice(&s.grid.data);
        nan_counts.push(s.nan_count as u32);
    }
    let video = VideoTensor::new([frames, bands.len(), h, w], data)?;
    if !video.in_unit_interval() {
        return Err(invalid("packed values outside [0, 1]"));
    }
    Ok(PackedVideo {
        video,
        timestamps,
        nan_counts,
    })
}

/// Days, nightly hours and bands of an archive download.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchWindow {
    pub year: u32,
    /// Inclusive day-of-year range; empty when `first_day > last_day`.
    pub first_day: u32,
    pub last_day: u32,
    /// UTC hours `start_hour..end_hour`.
    pub start_hour: u32,
    pub end_hour: u32,
    pub slices_per_hour: u32,
    pub bands: Vec<u8>,
}

impl Default for FetchWindow {
    fn default() -> Self {
        Self {
            year: 2022,
            first_day: 80,
            last_day: 135,
            start_hour: 5,
            end_hour: 12,
            slices_per_hour: 12,
            bands: (FIRST_BAND..=LAST_BAND).collect(),
        }
    }
}

/// One expected archive object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchEntry {
    pub band: u8,
    pub day: u32,
    pub hour: u32,
    pub minute: u32,
    pub url: String,
}

impl FetchWindow {
    pub fn validate(&self) -> Result<()> {
        if self.end_hour > 24 || self.start_hour > self.end_hour {
            return Err(invalid(format!("hour window {}..{} invalid", self.start_hour, self.end_hour)));
        }
        if self.slices_per_hour == 0 || 60 % self.slices_per_hour != 0 {
            return Err(invalid(format!("{} slices per hour does not divide the hour", self.slices_per_hour)));
        }
        if self.last_day > 366 {
            return Err(invalid(format!("day {} out of range", self.last_day)));
        }
        Ok(())
    }

    pub fn days(&self) -> u32 {
        (self.last_day + 1).saturating_sub(self.first_day)
    }

    pub fn expected_per_band(&self) -> u64 {
        self.days() as u64 * (self.end_hour - self.start_hour) as u64 * self.slices_per_hour as u64
    }

    /// Entries ordered by day, hour, minute, band. Placeholders:
    /// `{year}`, `{doy}` (3 digits), `{hour}`, `{minute}`, `{band}` (2 digits).
    pub fn entries(&self, template: &str) -> Result<Vec<FetchEntry>> {
        self.validate()?;
        check_template(template)?;
        let step = 60 / self.slices_per_hour;
        let mut out = Vec::new();
        for day in self.first_day..=self.last_day {
            if self.first_day > self.last_day {
                break;
            }
            for hour in self.start_hour..self.end_hour {
                for slot in 0..self.slices_per_hour {
                    let minute = slot * step;
                    for &band in &self.bands {
                        let url = template
                            .replace("{year}", &format!("{}", self.year))
                            .replace("{doy}", &format!("{day:03}"))
                            .replace("{hour}", &format!("{hour:02}"))
                            .replace("{minute}", &format!("{minute:02}"))
                            .replace("{band}", &format!("{band:02}"));
                        out.push(FetchEntry { band, day, hour, minute, url });
                    }
                }
            }
        }
        Ok(out)
    }
}

fn check_template(template: &str) -> Result<()> {
    const KNOWN: [&str; 5] = ["year", "doy", "hour", "minute", "band"];
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or_else(|| invalid(format!("unclosed placeholder in {template:?}")))?;
        let name = &after[..close];
        if !KNOWN.contains(&name) {
            return Err(invalid(format!("unknown placeholder {{{name}}} in URL template")));
        }
        rest = &after[close + 1..];
    }
    if rest.contains('}') {
        return Err(invalid(format!("stray '}}' in {template:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid(rows: usize, cols: usize, v: &[f64]) -> Grid {
        Grid::new(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn normalization_examples() {
        let n = normalize_slice(&grid(2, 2, &[1.0, 2.0, 3.0, 5.0]), 0).unwrap();
        assert_eq!(n.grid.data(), &[0.0, 0.25, 0.5, 1.0]);
        let n = normalize_slice(&grid(2, 2, &[f64::NAN, 2.0, 4.0, 2.0]), 0).unwrap();
        assert_eq!(n.grid.data(), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(n.nan_count, 1);
        let n = normalize_slice(&grid(1, 3, &[7.0, 7.0, f64::NAN]), 0).unwrap();
        assert!(n.degenerate);
        assert_eq!(n.grid.data(), &[0.0, 0.0, 0.0]);
        match normalize_slice(&grid(1, 2, &[f64::NAN, f64::NAN]), 1234) {
            Err(Error::AllNan { timestamp }) => assert_eq!(timestamp, 1234),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crop_bounds() {
        let g = Grid::new(256, 256, (0..256 * 256).map(|i| i as f64).collect()).unwrap();
        assert_eq!(crop(&g, (0, 0), 256).unwrap(), g);
        let scene = Grid::new(SCENE_ROWS, SCENE_COLS, vec![0.0; SCENE_ROWS * SCENE_COLS]).unwrap();
        assert!(matches!(crop(&scene, (1400, 2300), CROP_SIZE), Err(Error::CropBounds { .. })));
        assert!(crop(&scene, DEFAULT_CROP_ORIGIN, CROP_SIZE).is_ok());
    }

    #[test]
    fn invalid_radiance_and_temperature_are_nan() {
        let c = PlanckCoeffs::new(2e5, 3.7e3, 0.5, 0.998).unwrap();
        assert!(rad_to_bt(0.0, &c).is_nan());
        assert!(rad_to_bt(-1.0, &c).is_nan());
        assert!(bt_to_rad(-10.0, &c).is_nan());
        assert!(PlanckCoeffs::new(-1.0, 1.0, 0.0, 1.0).is_err());
        assert!(PlanckCoeffs::new(1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn manifest_counts() {
        let w = FetchWindow::default();
        assert_eq!(w.days(), 56);
        assert_eq!(w.expected_per_band(), 4704);
        let empty = FetchWindow { first_day: 10, last_day: 9, ..FetchWindow::default() };
        assert_eq!(empty.expected_per_band(), 0);
        assert!(empty.entries("http://h/{band}").unwrap().is_empty());
        let one = FetchWindow { first_day: 80, last_day: 80, start_hour: 5, end_hour: 6, bands: vec![7, 13], ..FetchWindow::default() };
        let e = one.entries("http://h/{year}/{doy}/{hour}{minute}/C{band}.bin").unwrap();
        assert_eq!(e.len(), 24);
        assert_eq!(e[0].url, "http://h/2022/080/0500/C07.bin");
        assert_eq!(e[23].url, "http://h/2022/080/0555/C13.bin");
        assert!(one.entries("http://h/{bnad}").is_err());
    }
}
