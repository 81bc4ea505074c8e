mod support;

use lrvp_core::diff::Tensor;
use lrvp_core::eval::{psnr, ssim};
use support::lcg_uniform;

fn frame(seed: u64, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), lcg_uniform(seed, n)).unwrap()
}

/// `(1 - mix) * a + mix * b` with `a`, `b` drawn from the LCG; mirrors the reference script.
fn pair(seed_a: u64, seed_b: u64, mix: f64, shape: &[usize]) -> (Tensor, Tensor) {
    let a = frame(seed_a, shape);
    let b = frame(seed_b, shape);
    let mixed = a.data().iter().zip(b.data()).map(|(x, y)| (1.0 - mix) * x + mix * y).collect();
    (a.clone(), Tensor::new(shape.to_vec(), mixed).unwrap())
}

#[test]
fn psnr_matches_scalar_loop() {
    for (seed, shape) in [(1u64, [1usize, 16, 16]), (2, [3, 7, 5]), (3, [2, 64, 64])] {
        let a = frame(seed, &shape);
        let b = frame(seed + 100, &shape);
        let [c, h, w] = shape;
        let mut acc = 0.0;
        for k in 0..c {
            for i in 0..h {
                for j in 0..w {
                    let idx = (k * h + i) * w + j;
                    let d = a.data()[idx] - b.data()[idx];
                    acc += d * d;
                }
            }
        }
        let oracle = 10.0 * (1.0 / (acc / (c * h * w) as f64)).log10();
        assert!((psnr(&a, &b).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn ssim_matches_reference_library() {
    // skimage.metrics.structural_similarity(gaussian_weights=True, sigma=1.5,
    // use_sample_covariance=False, data_range=1.0), bands on channel_axis=0
    let cases: [(u64, u64, f64, &[usize], f64); 4] = [
        (1, 2, 1.0, &[64, 64], 0.017_245_186_851_494_097),
        (3, 4, 0.3, &[64, 64], 0.885_810_009_199_122_2),
        (5, 6, 0.05, &[40, 23], 0.997_322_178_269_067),
        (7, 8, 0.5, &[3, 32, 32], 0.662_935_088_777_348_7),
    ];
    for (sa, sb, mix, shape, expected) in cases {
        let (a, b) = pair(sa, sb, mix, shape);
        let got = ssim(&a, &b).unwrap();
        assert!((got - expected).abs() < 1e-6, "{shape:?}: {got} vs {expected}");
    }
}

/// Direct 2-D weighted window loop.
fn ssim_brute(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
    let total: f64 = g.iter().flat_map(|x| g.iter().map(move |y| x * y)).sum();
    let (c1, c2) = (1e-4, 9e-4);
    let mut acc = 0.0;
    let mut count = 0;
    for r in 0..=h - 11 {
        for c in 0..=w - 11 {
            let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wt = g[i] * g[j] / total;
                    let (x, y) = (a[(r + i) * w + c + j], b[(r + i) * w + c + j]);
                    ma += wt * x;
                    mb += wt * y;
                    aa += wt * x * x;
                    bb += wt * y * y;
                    ab += wt * x * y;
                }
            }
            let (va, vb, cov) = (aa - ma * ma, bb - mb * mb, ab - ma * mb);
            acc += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

#[test]
fn ssim_matches_window_loop_and_is_symmetric() {
    let (a, b) = pair(11, 12, 0.4, &[1, 30, 27]);
    let oracle = ssim_brute(a.data(), b.data(), 30, 27);
    let got = ssim(&a, &b).unwrap();
    assert!((got - oracle).abs() < 1e-12);
    assert_eq!(got, ssim(&b, &a).unwrap());
    assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    assert!((-1.0..=1.0).contains(&got));
}
