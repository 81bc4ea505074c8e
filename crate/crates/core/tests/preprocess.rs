use lrvp_core::goes::{bt_to_rad, crop, normalize_slice, rad_to_bt, to_band7_radiance, Grid, PlanckCoeffs, RadianceSlice};
use lrvp_core::Error;
use proptest::prelude::*;

/// Representative ABI coefficients (band 7 and band 9), not read from a live granule.
fn band7() -> PlanckCoeffs {
    PlanckCoeffs::new(202_263.0, 3_698.19, 0.433_61, 0.999_39).unwrap()
}

fn band9() -> PlanckCoeffs {
    PlanckCoeffs::new(35_828.3, 2_076.95, 0.344_27, 0.999_18).unwrap()
}

fn coeffs() -> impl Strategy<Value = PlanckCoeffs> {
    (1e3..3e5f64, 500.0..4000.0f64, 0.0..2.0f64, 0.98..1.0f64).prop_map(|(a, b, c, d)| PlanckCoeffs::new(a, b, c, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn radiance_round_trip(c in coeffs(), l in 1e-3..300.0f64) {
        let back = bt_to_rad(rad_to_bt(l, &c), &c);
        prop_assert!(((back - l) / l).abs() < 1e-9, "{l} -> {back}");
    }

    #[test]
    fn temperature_round_trip(c in coeffs(), t in 150.0..350.0f64) {
        let back = rad_to_bt(bt_to_rad(t, &c), &c);
        prop_assert!(((back - t) / t).abs() < 1e-9);
    }

    #[test]
    fn conversions_are_monotone(c in coeffs(), l in 1e-2..200.0f64, d in 1e-3..1.0f64) {
        prop_assert!(rad_to_bt(l * (1.0 + d), &c) > rad_to_bt(l, &c));
        let t = rad_to_bt(l, &c);
        prop_assert!(bt_to_rad(t + d, &c) > bt_to_rad(t, &c));
    }
}

#[test]
fn reference_pixels() {
    // 40-digit evaluation of the same formulas with an arbitrary-precision library
    let t = rad_to_bt(0.8123, &band7());
    assert!((t - 297.383_721_855_264_1).abs() / t < 1e-12, "{t}");
    let t9 = rad_to_bt(2.4519, &band9());
    assert!((t9 - 216.414_554_486_598_5).abs() / t9 < 1e-12, "{t9}");
    let r = bt_to_rad(t9, &band7());
    assert!((r - 0.007_849_168_730_152_736).abs() / r < 1e-11, "{r}");
}

fn slice(band: u8, coeffs: PlanckCoeffs, data: Vec<f64>, rows: usize, cols: usize) -> RadianceSlice {
    RadianceSlice {
        band,
        timestamp: 1_648_000_000,
        coeffs,
        grid: Grid::new(rows, cols, data).unwrap(),
    }
}

fn pseudo_radiances(n: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut x = seed;
    (0..n)
        .map(|_| {
            x = x.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            scale * (0.05 + (x >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}

#[test]
fn band7_self_conversion_is_identity() {
    let data = pseudo_radiances(40 * 30, 1, 2.0);
    let out = to_band7_radiance(&slice(7, band7(), data.clone(), 40, 30), &band7()).unwrap();
    for (a, b) in out.grid.data().iter().zip(&data) {
        assert!(((a - b) / b).abs() < 1e-9);
    }
    assert_eq!(out.invalid_pixels, 0);
}

#[test]
fn cross_band_matches_scalar_loop() {
    let mut data = pseudo_radiances(50 * 20, 2, 5.0);
    data[17] = f64::NAN;
    data[18] = -1.0;
    let s = slice(9, band9(), data.clone(), 50, 20);
    let out = to_band7_radiance(&s, &band7()).unwrap();
    let (c9, c7) = (band9(), band7());
    for (i, &l) in data.iter().enumerate() {
        // independent transcription of the two formulas
        let oracle = if l > 0.0 {
            let bt = (c9.fk2 / (c9.fk1 / l + 1.0).ln() - c9.bc1) / c9.bc2;
            c7.fk1 / ((c7.fk2 / (bt * c7.bc2 + c7.bc1)).exp() - 1.0)
        } else {
            f64::NAN
        };
        let got = out.grid.data()[i];
        if oracle.is_nan() {
            assert!(got.is_nan(), "pixel {i}");
        } else {
            assert!(((got - oracle) / oracle).abs() < 1e-12, "pixel {i}: {got} vs {oracle}");
        }
    }
    assert!(out.grid.data()[17].is_nan());
    assert_eq!(out.invalid_pixels, 1);
}

#[test]
fn invalid_inputs_rejected() {
    let bad_band = slice(3, band7(), vec![1.0; 4], 2, 2);
    assert!(to_band7_radiance(&bad_band, &band7()).is_err());
    let bad_coeffs = PlanckCoeffs { fk1: -1.0, ..band7() };
    assert!(to_band7_radiance(&slice(7, band7(), vec![1.0; 4], 2, 2), &bad_coeffs).is_err());
}

#[test]
fn crop_probes_match_source() {
    let g = Grid::new(300, 400, (0..300 * 400).map(|i| i as f64).collect()).unwrap();
    let c = crop(&g, (13, 101), 256).unwrap();
    for (i, j) in [(0, 0), (255, 255), (17, 200), (128, 3)] {
        assert_eq!(c.get(i, j), g.get(13 + i, 101 + j));
    }
    assert!(crop(&g, (45, 0), 256).is_err());
}

fn grid_with_nans() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..12, 1usize..12).prop_flat_map(|(r, c)| {
        let cell = prop_oneof![8 => -1e3..1e3f64, 1 => Just(f64::NAN)];
        (Just(r), Just(c), proptest::collection::vec(cell, r * c))
    })
}

proptest! {
    #[test]
    fn normalization_properties((r, c, data) in grid_with_nans()) {
        let grid = Grid::new(r, c, data.clone()).unwrap();
        let finite: Vec<f64> = data.iter().copied().filter(|v| !v.is_nan()).collect();
        match normalize_slice(&grid, 7) {
            Err(Error::AllNan { timestamp }) => {
                prop_assert!(finite.is_empty());
                prop_assert_eq!(timestamp, 7);
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
            Ok(n) => {
                let out = n.grid.data();
                prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert_eq!(n.nan_count, data.len() - finite.len());
                let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(n.degenerate, lo == hi);
                for (o, v) in out.iter().zip(&data) {
                    if v.is_nan() || lo == hi {
                        prop_assert_eq!(*o, 0.0);
                    } else if *v == lo {
                        prop_assert_eq!(*o, 0.0);
                    } else if *v == hi {
                        prop_assert_eq!(*o, 1.0);
                    }
                }
            }
        }
    }
}

#[test]
fn listing_example_exact() {
    let n = normalize_slice(&Grid::new(2, 2, vec![1.0, 2.0, 3.0, 5.0]).unwrap(), 0).unwrap();
    assert_eq!(n.grid.data(), &[0.0, 0.25, 0.5, 1.0]);
    assert!(!n.degenerate);
}

proptest! {
    #[test]
    fn constant_slices_become_zeros(v in -1e3..1e3f64, mask in proptest::collection::vec(any::<bool>(), 1..40)) {
        prop_assume!(mask.iter().any(|m| !m));
        let data: Vec<f64> = mask.iter().map(|&nan| if nan { f64::NAN } else { v }).collect();
        let n = normalize_slice(&Grid::new(1, data.len(), data).unwrap(), 0).unwrap();
        prop_assert!(n.degenerate);
        prop_assert!(n.grid.data().iter().all(|&x| x == 0.0));
    }
}
