//! Slice bundles: one band of one scan with its Planck coefficients.
//!
//! Layout: magic `GSLC`, version u32, band u8, timestamp i64 (epoch seconds),
//! fk1, fk2, bc1, bc2 as f64, rows u32, cols u32, then `rows*cols` f32
//! radiances row-major (NaN allowed). All little-endian.

use std::io::Read;
use std::path::Path;

use lrvp_core::goes::{Grid, PlanckCoeffs, RadianceSlice};

use crate::codec::{dim32, put_f32s, put_u32, Reader};
use crate::error::{format_err, io_err, Result};

pub const MAGIC: &[u8; 4] = b"GSLC";
pub const VERSION: u32 = 1;
/// Bytes before the radiance block.
pub const HEADER_LEN: usize = 4 + 4 + 1 + 8 + 4 * 8 + 4 + 4;

#[derive(Debug, Clone, PartialEq)]
pub struct BundleHeader {
    pub band: u8,
    pub timestamp: i64,
    pub coeffs: PlanckCoeffs,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceBundle {
    pub header: BundleHeader,
    pub data: Vec<f32>,
}

fn decode_header(r: &mut Reader<'_>) -> Result<BundleHeader> {
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(format_err(format!("GSLC version {version} not supported (expected {VERSION})")));
    }
    let band = r.u8()?;
    let timestamp = r.i64()?;
    let coeffs = PlanckCoeffs {
        fk1: r.f64()?,
        fk2: r.f64()?,
        bc1: r.f64()?,
        bc2: r.f64()?,
    };
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    Ok(BundleHeader { band, timestamp, coeffs, rows, cols })
}

impl SliceBundle {
    pub fn from_slice(slice: &RadianceSlice) -> Self {
        Self {
            header: BundleHeader {
                band: slice.band,
                timestamp: slice.timestamp,
                coeffs: slice.coeffs,
                rows: slice.grid.rows(),
                cols: slice.grid.cols(),
            },
            data: slice.grid.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_slice(&self) -> Result<RadianceSlice> {
        let h = &self.header;
        let grid = Grid::new(h.rows, h.cols, self.data.iter().map(|&v| v as f64).collect())?;
        Ok(RadianceSlice { band: h.band, timestamp: h.timestamp, coeffs: h.coeffs, grid })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let h = &self.header;
        if self.data.len() != h.rows * h.cols {
            return Err(format_err(format!("GSLC: {} values for a {}x{} grid", self.data.len(), h.rows, h.cols)));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        out.push(h.band);
        out.extend_from_slice(&h.timestamp.to_le_bytes());
        for c in [h.coeffs.fk1, h.coeffs.fk2, h.coeffs.bc1, h.coeffs.bc2] {
            out.extend_from_slice(&c.to_le_bytes());
        }
        put_u32(&mut out, dim32(h.rows, "rows")?);
        put_u32(&mut out, dim32(h.cols, "cols")?);
        put_f32s(&mut out, &self.data);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "GSLC");
        let header = decode_header(&mut r)?;
        let data = r.f32s(header.rows * header.cols)?;
        r.finish()?;
        Ok(Self { header, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()?).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path).map_err(io_err(path))?)
    }
}

/// Reads only the fixed-size header of a bundle file.
pub fn read_header(path: &Path) -> Result<BundleHeader> {
    let mut buf = [0u8; HEADER_LEN];
    let mut f = std::fs::File::open(path).map_err(io_err(path))?;
    f.read_exact(&mut buf).map_err(io_err(path))?;
    decode_header(&mut Reader::new(&buf, "GSLC"))
}
