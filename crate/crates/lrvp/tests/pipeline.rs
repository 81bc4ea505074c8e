use std::path::Path;

use lrvp::gslc::{BundleHeader, SliceBundle};
use lrvp::lrvv::VideoFile;
use lrvp::pipeline::{preprocess_dir, PreprocessOptions};
use lrvp::threads::Threads;
use lrvp_core::goes::PlanckCoeffs;

const ROWS: usize = 20;
const COLS: usize = 24;

fn coeffs(band: u8, t: i64) -> PlanckCoeffs {
    // loosely shaped like the real bands; band 7 drifts a little between scans
    let b = band as f64;
    let drift = if band == 7 { 1.0 + 1e-4 * (t % 7) as f64 } else { 1.0 };
    PlanckCoeffs {
        fk1: 2.0e5 / (b - 5.0).powi(2) * drift,
        fk2: 3700.0 * 7.0 / b,
        bc1: 0.4,
        bc2: 0.999,
    }
}

fn radiances(band: u8, t: i64) -> Vec<f32> {
    let mut x = (band as u64) * 1_000_003 + t as u64;
    (0..ROWS * COLS)
        .map(|i| {
            x = x.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            if (i + band as usize).is_multiple_of(37) {
                f32::NAN
            } else {
                0.5 + 10.0 * (x >> 40) as f32 / (1u64 << 24) as f32
            }
        })
        .collect()
}

fn write_bundles(dir: &Path, stamps: &[i64], bands: &[u8]) {
    for &t in stamps {
        for &b in bands {
            let bundle = SliceBundle {
                header: BundleHeader { band: b, timestamp: t, coeffs: coeffs(b, t), rows: ROWS, cols: COLS },
                data: radiances(b, t),
            };
            bundle.write(&dir.join(format!("t{t}_b{b:02}.gslc"))).unwrap();
        }
    }
}

fn opts() -> PreprocessOptions {
    PreprocessOptions { origin: (2, 3), size: 8, frames: 3, bands: vec![7, 8, 9], compress: false }
}

/// Expected normalized crop, transcribed independently of the library.
fn oracle(band: u8, t: i64) -> Vec<f64> {
    let src = coeffs(band, t);
    let b7 = coeffs(7, t);
    let raw = radiances(band, t);
    let mut crop = Vec::new();
    for r in 2..10 {
        for c in 3..11 {
            let l = raw[r * COLS + c] as f64;
            let bt = (src.fk2 / (src.fk1 / l + 1.0).ln() - src.bc1) / src.bc2;
            crop.push(b7.fk1 / ((b7.fk2 / (b7.bc1 + b7.bc2 * bt)).exp() - 1.0));
        }
    }
    let lo = crop.iter().copied().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min);
    let hi = crop.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    crop.iter().map(|&v| if v.is_nan() { 0.0 } else { (v - lo) / (hi - lo) }).collect()
}

#[test]
fn bundles_become_normalized_videos() {
    let src = tempfile::tempdir().unwrap();
    let stamps: Vec<i64> = (0..7).map(|i| 1_648_000_000 + 300 * i).collect();
    write_bundles(src.path(), &stamps, &[7, 8, 9]);
    let out = tempfile::tempdir().unwrap();
    let videos = preprocess_dir(src.path(), out.path(), &opts(), &Threads::new(1)).unwrap();
    // seven timestamps make two full three-frame videos
    assert_eq!(videos.len(), 2);
    assert_eq!(videos[1].timestamps, stamps[3..6]);

    let v = VideoFile::read(&out.path().join("video_0001.lrvv")).unwrap();
    assert_eq!(v.dims, [3, 3, 8, 8]);
    for (f, &t) in stamps[3..6].iter().enumerate() {
        for (bi, band) in [7u8, 8, 9].into_iter().enumerate() {
            let expected = oracle(band, t);
            let off = (f * 3 + bi) * 64;
            for (k, e) in expected.iter().enumerate() {
                let got = v.data[off + k] as f64;
                assert!((got - e).abs() < 1e-6, "t {t} band {band} pixel {k}: {got} vs {e}");
            }
            let nans = (2..10).flat_map(|r| (3..11).map(move |c| (r, c))).filter(|&(r, c)| radiances(band, t)[r * COLS + c].is_nan()).count();
            assert_eq!(v.nan_counts[f * 3 + bi] as usize, nans);
        }
    }
    assert!(v.nan_counts.iter().any(|&c| c > 0));
}

#[test]
fn worker_count_does_not_change_bytes() {
    let src = tempfile::tempdir().unwrap();
    let stamps: Vec<i64> = (0..6).map(|i| 100 + i).collect();
    write_bundles(src.path(), &stamps, &[7, 8, 9]);
    let mut outputs = Vec::new();
    for workers in [1, 4] {
        let out = tempfile::tempdir().unwrap();
        preprocess_dir(src.path(), out.path(), &PreprocessOptions { compress: true, ..opts() }, &Threads::new(workers)).unwrap();
        let files: Vec<Vec<u8>> = (0..2).map(|i| std::fs::read(out.path().join(format!("video_{i:04}.lrvv"))).unwrap()).collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn missing_slices_are_listed() {
    let src = tempfile::tempdir().unwrap();
    write_bundles(src.path(), &[10, 20, 30], &[7, 8, 9]);
    std::fs::remove_file(src.path().join("t20_b08.gslc")).unwrap();
    std::fs::remove_file(src.path().join("t30_b09.gslc")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let err = preprocess_dir(src.path(), out.path(), &opts(), &Threads::new(2)).unwrap_err();
    assert_eq!(err.category(), "data");
    match err {
        lrvp::Error::Core(lrvp_core::Error::MissingSlices(pairs)) => assert_eq!(pairs, [(20, 8), (30, 9)]),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn duplicate_and_out_of_range_inputs_rejected() {
    let src = tempfile::tempdir().unwrap();
    write_bundles(src.path(), &[10, 20, 30], &[7, 8, 9]);
    std::fs::copy(src.path().join("t10_b07.gslc"), src.path().join("copy.gslc")).unwrap();
    let out = tempfile::tempdir().unwrap();
    assert_eq!(preprocess_dir(src.path(), out.path(), &opts(), &Threads::new(1)).unwrap_err().category(), "format");
    std::fs::remove_file(src.path().join("copy.gslc")).unwrap();
    let far = PreprocessOptions { origin: (15, 3), ..opts() };
    assert_eq!(preprocess_dir(src.path(), out.path(), &far, &Threads::new(1)).unwrap_err().category(), "data");
}
