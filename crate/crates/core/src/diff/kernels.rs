//! Dense loops behind the heavier tape ops.

use alloc::vec;
use alloc::vec::Vec;

/// Geometry of a single-example 2-D convolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    /// Output rows `oy` for which `oy*stride + ky - pad` lands inside `[0, h)`.
    fn valid_range(n_out: usize, n_in: usize, stride: usize, off: usize, pad: usize) -> (usize, usize) {
        // smallest o with o*s + off >= pad
        let lo = if off >= pad { 0 } else { (pad - off).div_ceil(stride) };
        // largest o with o*s + off - pad <= n_in - 1
        let hi_excl = if n_in + pad <= off {
            0
        } else {
            ((n_in + pad - off - 1) / stride + 1).min(n_out)
        };
        (lo.min(hi_excl), hi_excl)
    }
}

/// Unfolds input patches into a `[c_in*kh*kw, ho*wo]` matrix (zeros where padded).
fn im2col(g: &ConvGeom, x: &[f64]) -> Vec<f64> {
    let p = g.ho * g.wo;
    let mut cols = vec![0.0; g.c_in * g.kh * g.kw * p];
    for c in 0..g.c_in {
        let x_plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            let (oy0, oy1) = ConvGeom::valid_range(g.ho, g.h, g.stride, ky, g.pad);
            for kx in 0..g.kw {
                let (ox0, ox1) = ConvGeom::valid_range(g.wo, g.w, g.stride, kx, g.pad);
                let row = &mut cols[((c * g.kh + ky) * g.kw + kx) * p..][..p];
                for oy in oy0..oy1 {
                    let iy = oy * g.stride + ky - g.pad;
                    let xrow = &x_plane[iy * g.w..(iy + 1) * g.w];
                    let orow = &mut row[oy * g.wo..(oy + 1) * g.wo];
                    for ox in ox0..ox1 {
                        orow[ox] = xrow[ox * g.stride + kx - g.pad];
                    }
                }
            }
        }
    }
    cols
}

/// Adds a `[c_in*kh*kw, ho*wo]` patch-gradient matrix back onto the input layout.
fn col2im_add(g: &ConvGeom, cols: &[f64], gx: &mut [f64]) {
    let p = g.ho * g.wo;
    for c in 0..g.c_in {
        let gx_plane = &mut gx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            let (oy0, oy1) = ConvGeom::valid_range(g.ho, g.h, g.stride, ky, g.pad);
            for kx in 0..g.kw {
                let (ox0, ox1) = ConvGeom::valid_range(g.wo, g.w, g.stride, kx, g.pad);
                let row = &cols[((c * g.kh + ky) * g.kw + kx) * p..][..p];
                for oy in oy0..oy1 {
                    let iy = oy * g.stride + ky - g.pad;
                    let grow = &mut gx_plane[iy * g.w..(iy + 1) * g.w];
                    let crow = &row[oy * g.wo..(oy + 1) * g.wo];
                    for ox in ox0..ox1 {
                        grow[ox * g.stride + kx - g.pad] += crow[ox];
                    }
                }
            }
        }
    }
}

/// Dot product with four independent accumulators.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn conv2d_forward(g: &ConvGeom, x: &[f64], k: &[f64], b: &[f64], out: &mut [f64]) {
    let p = g.ho * g.wo;
    let kk = g.c_in * g.kh * g.kw;
    let cols = im2col(g, x);
    for o in 0..g.c_out {
        out[o * p..(o + 1) * p].iter_mut().for_each(|v| *v = b[o]);
    }
    matmul(k, &cols, g.c_out, kk, p, out);
}

/// Accumulates input, kernel and bias gradients.
pub(crate) fn conv2d_backward(
    g: &ConvGeom,
    x: &[f64],
    k: &[f64],
    gout: &[f64],
    gx: &mut [f64],
    gk: &mut [f64],
    gb: &mut [f64],
) {
    let p = g.ho * g.wo;
    let kk = g.c_in * g.kh * g.kw;
    let cols = im2col(g, x);
    let mut gcols = vec![0.0; kk * p];
    for o in 0..g.c_out {
        let go = &gout[o * p..(o + 1) * p];
        gb[o] += go.iter().sum::<f64>();
        for r in 0..kk {
            gk[o * kk + r] += dot(go, &cols[r * p..(r + 1) * p]);
            let w = k[o * kk + r];
            if w != 0.0 {
                for (gc, gv) in gcols[r * p..(r + 1) * p].iter_mut().zip(go) {
                    *gc += w * gv;
                }
            }
        }
    }
    col2im_add(g, &gcols, gx);
}

/// `c = a · b` for row-major `[m, k] x [k, n]`.
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cj, bj) in crow.iter_mut().zip(brow) {
                *cj += aip * bj;
            }
        }
    }
}
