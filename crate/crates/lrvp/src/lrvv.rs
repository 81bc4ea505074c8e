//! Video files.
//!
//! Layout: magic `LRVV`, version u32, flags u32, then a payload that is gzip
//! compressed when flag bit 0 is set. The payload holds dims `T, B, H, W` as
//! u32, `T*B*H*W` f32 values in `[t][band][row][col]` order and one u32
//! NaN-replacement count per `(t, band)`. Integers and floats are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use lrvp_core::video::VideoTensor;

use crate::codec::{dim32, put_f32s, put_u32, Reader};
use crate::error::{format_err, io_err, Result};

pub const MAGIC: &[u8; 4] = b"LRVV";
pub const VERSION: u32 = 1;
pub const FLAG_GZIP: u32 = 1;

/// Video as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFile {
    pub dims: [usize; 4],
    pub data: Vec<f32>,
    pub nan_counts: Vec<u32>,
}

impl VideoFile {
    /// Narrows the values to f32. `nan_counts` defaults to zeros.
    pub fn from_video(video: &VideoTensor, nan_counts: Option<Vec<u32>>) -> Result<Self> {
        let [t, b, _, _] = video.dims();
        let nan_counts = nan_counts.unwrap_or_else(|| vec![0; t * b]);
        if nan_counts.len() != t * b {
            return Err(format_err(format!("{} NaN counts for {t}x{b} (frame, band) pairs", nan_counts.len())));
        }
        Ok(Self {
            dims: video.dims(),
            data: video.data().iter().map(|&v| v as f32).collect(),
            nan_counts,
        })
    }

    pub fn to_video(&self) -> Result<VideoTensor> {
        Ok(VideoTensor::new(self.dims, self.data.iter().map(|&v| v as f64).collect())?)
    }

    pub fn encode(&self, compress: bool) -> Result<Vec<u8>> {
        let mut payload = Vec::with_capacity(16 + 4 * (self.data.len() + self.nan_counts.len()));
        for d in self.dims {
            put_u32(&mut payload, dim32(d, "video dimension")?);
        }
        put_f32s(&mut payload, &self.data);
        for &c in &self.nan_counts {
            put_u32(&mut payload, c);
        }
        let mut out = Vec::with_capacity(12 + payload.len());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, if compress { FLAG_GZIP } else { 0 });
        if compress {
            let mut enc = GzEncoder::new(out, Compression::default());
            enc.write_all(&payload).expect("writing to memory");
            out = enc.finish().expect("writing to memory");
        } else {
            out.extend_from_slice(&payload);
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "LRVV");
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(format_err(format!("LRVV version {version} not supported (expected {VERSION})")));
        }
        let flags = r.u32()?;
        if flags & !FLAG_GZIP != 0 {
            return Err(format_err(format!("LRVV: unknown flags {flags:#x}")));
        }
        let rest = r.take(bytes.len() - 12)?;
        let inflated;
        let payload = if flags & FLAG_GZIP != 0 {
            let mut buf = Vec::new();
            GzDecoder::new(rest).read_to_end(&mut buf).map_err(|e| format_err(format!("LRVV: bad gzip payload: {e}")))?;
            inflated = buf;
            &inflated[..]
        } else {
            rest
        };
        let mut p = Reader::new(payload, "LRVV payload");
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = p.u32()? as usize;
        }
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| format_err("LRVV: dims overflow"))?;
        let data = p.f32s(n)?;
        let nan_counts = p.u32s(dims[0] * dims[1])?;
        p.finish()?;
        Ok(Self { dims, data, nan_counts })
    }

    pub fn write(&self, path: &Path, compress: bool) -> Result<()> {
        std::fs::write(path, self.encode(compress)?).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path).map_err(io_err(path))?)
    }
}

pub fn read_video(path: &Path) -> Result<VideoTensor> {
    VideoFile::read(path)?.to_video()
}

pub fn write_video(path: &Path, video: &VideoTensor, compress: bool) -> Result<()> {
    VideoFile::from_video(video, None)?.write(path, compress)
}
