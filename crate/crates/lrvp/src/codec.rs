//! Little-endian primitives shared by the binary formats.

use crate::error::{format_err, Result};

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format_err(format!("{}: truncated at byte {} (wanted {n} more)", self.what, self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| format_err(format!("{}: length overflow", self.what)))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| format_err(format!("{}: length overflow", self.what)))?)?;
        Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(format_err(format!("{}: bad magic {:?}", self.what, String::from_utf8_lossy(got))));
        }
        Ok(())
    }

    pub fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn finish(&self) -> Result<()> {
        if !self.at_end() {
            return Err(format_err(format!("{}: {} trailing bytes", self.what, self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, v: &[f32]) {
    out.reserve(v.len() * 4);
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

/// Dimension as u32, failing on overflow.
pub(crate) fn dim32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| format_err(format!("{what} {n} does not fit in u32")))
}
