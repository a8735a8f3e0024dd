use std::f64::consts::PI;
use std::fs;

use polarhe::polarimetry::{MuellerImage, MuellerMatrix};
use polarhe::slide::*;
use polarhe::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::new(width, height, (0..width * height).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

#[test]
fn flat_field_removes_gain_ramp() {
    let (w, h) = (160, 120);
    let pattern = |x: usize, y: usize| if (x + y) % 2 == 0 { 0.3 } else { 0.7 };
    // linear gain with mean 1
    let gain = |x: usize| 0.7 + 0.6 * x as f64 / (w - 1) as f64;
    let img = GrayImage::from_fn(w, h, |x, y| pattern(x, y) * gain(x)).unwrap();
    let out = flat_field_correct(&img, 15).unwrap();
    let mut worst = 0.0f64;
    for y in 16..h - 16 {
        for x in 16..w - 16 {
            worst = worst.max((out.get(x, y) - pattern(x, y)).abs() / pattern(x, y));
        }
    }
    assert!(worst < 0.02, "worst relative error {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flat_field_output_in_unit_range(seed in any::<u64>(), radius in 1usize..8) {
        let img = noise(23, 17, seed);
        let out = flat_field_correct(&img, radius).unwrap();
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn transform_inverse_roundtrip(rot in -3.0..3.0f64, dx in -50.0..50.0f64, dy in -50.0..50.0f64, s in 0.5..2.0f64) {
        let t = RigidTransform::new(rot, dx, dy, s).unwrap();
        let back = t.inverse().inverse();
        prop_assert!((back.dx - t.dx).abs() < 1e-9 && (back.dy - t.dy).abs() < 1e-9);
        prop_assert!((back.scale - t.scale).abs() < 1e-12);
        prop_assert!(wrap_angle(back.rotation - t.rotation).abs() < 1e-12);
    }

    #[test]
    fn mask_invariant_to_affine_rescaling(seed in any::<u64>(), a_pow in -2i32..1, b_idx in 0usize..3) {
        // Quantized inputs and power-of-two scales keep the bin arithmetic exact.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..30 * 20).map(|_| rng.random_range(0..=64) as f64 / 256.0).collect();
        let a = 2f64.powi(a_pow);
        let b = [0.0, 0.125, 0.5][b_idx];
        let img = GrayImage::new(30, 20, raw.clone()).unwrap();
        let scaled = GrayImage::new(30, 20, raw.iter().map(|v| a * v + b).collect()).unwrap();
        prop_assert_eq!(tissue_mask(&img).mask, tissue_mask(&scaled).mask);
    }
}

#[test]
fn integer_translation_is_an_exact_shift() {
    let img = synthetic_tissue(40, 30, 3).unwrap();
    let out = resample_gray(&img, &RigidTransform::translation(3.0, -2.0), (40, 30)).unwrap();
    for y in 0..30i64 {
        for x in 0..40i64 {
            let (sx, sy) = (x - 3, y + 2);
            let inside = (0..40).contains(&sx) && (0..30).contains(&sy);
            let i = (y * 40 + x) as usize;
            assert_eq!(out.coverage[i], inside, "coverage at ({x}, {y})");
            let expected = if inside { img.get(sx as usize, sy as usize) } else { 0.0 };
            assert_eq!(out.image.data()[i], expected);
        }
    }
}

#[test]
fn coverage_of_a_scaled_footprint() {
    let img = GrayImage::filled(11, 11, 0.5).unwrap();
    // Halving around the center maps [-5, 5] to [-2.5, 2.5].
    let out = resample_gray(&img, &RigidTransform::new(0.0, 0.0, 0.0, 0.5).unwrap(), (11, 11)).unwrap();
    for y in 0..11 {
        for x in 0..11 {
            let inside = (x as f64 - 5.0).abs() <= 2.5 && (y as f64 - 5.0).abs() <= 2.5;
            assert_eq!(out.coverage[y * 11 + x], inside);
        }
    }
}

#[test]
fn mueller_channels_resample_like_gray() {
    let src = MuellerImage::from_fn(12, 9, |x, y| {
        let mut m = MuellerMatrix::identity();
        m.m[0][1] = (x as f64) / 12.0;
        m.m[2][3] = (y as f64) / 9.0;
        m
    });
    let t = RigidTransform::new(0.2, 1.3, -0.7, 1.1).unwrap();
    let out = resample_mueller(&src, &t, (10, 10)).unwrap();
    for c in [1usize, 11, 0] {
        let gray = GrayImage::new(12, 9, src.channel(c)).unwrap();
        let g = resample_gray(&gray, &t, (10, 10)).unwrap();
        assert_eq!(g.coverage, out.coverage);
        for (a, b) in g.image.data().iter().zip(out.image.channel(c)) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn registration_of_identical_images_is_identity() {
    let img = synthetic_tissue(160, 160, 1).unwrap();
    let r = register_rigid(&img, &img, &SearchBounds::default()).unwrap();
    assert!(r.transform.dx.abs() <= 0.5 && r.transform.dy.abs() <= 0.5, "{:?}", r.transform);
    assert!(r.transform.rotation.abs() <= 0.25f64.to_radians());
    assert!(r.score > 0.99);
}

#[test]
fn registration_recovers_shift() {
    let reference = synthetic_tissue(160, 160, 2).unwrap();
    let moving = resample_gray(&reference, &RigidTransform::translation(7.0, -3.0), (160, 160)).unwrap().image;
    let t = register_rigid(&moving, &reference, &SearchBounds::default()).unwrap().transform;
    assert!((t.dx - 7.0).abs() <= 1.0 && (t.dy + 3.0).abs() <= 1.0, "{t:?}");
}

#[test]
fn registration_recovers_rotation() {
    let reference = synthetic_tissue(160, 160, 4).unwrap();
    let truth = RigidTransform::new(5f64.to_radians(), 0.0, 0.0, 1.0).unwrap();
    let moving = resample_gray(&reference, &truth, (160, 160)).unwrap().image;
    let t = register_rigid(&moving, &reference, &SearchBounds::default()).unwrap().transform;
    assert!((t.rotation - truth.rotation).abs() <= 0.5f64.to_radians(), "{t:?}");
    assert!(t.dx.abs() <= 1.0 && t.dy.abs() <= 1.0);
}

#[test]
fn unrelated_images_fail_to_register() {
    let err = register_rigid(&noise(96, 96, 1), &noise(96, 96, 2), &SearchBounds::default()).unwrap_err();
    match err {
        Error::Registration { score, floor } => assert!(score < floor),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn two_level_image_masks_dark_region() {
    let img = GrayImage::from_fn(40, 30, |x, y| if x < 15 || y > 24 { 0.2 } else { 0.8 }).unwrap();
    let m = tissue_mask(&img);
    assert!(!m.degenerate);
    for y in 0..30 {
        for x in 0..40 {
            assert_eq!(m.mask[y * 40 + x], img.get(x, y) == 0.2);
        }
    }
}

#[test]
fn blank_images_are_degenerate() {
    for v in [1.0, 0.0, 0.4] {
        let m = tissue_mask(&GrayImage::filled(8, 8, v).unwrap());
        assert!(m.degenerate && m.mask.iter().all(|&t| !t));
    }
}

fn full_mask(w: usize, h: usize, tissue: bool) -> TissueMask {
    TissueMask { width: w, height: h, mask: vec![tissue; w * h], threshold: 0.5, degenerate: false }
}

#[test]
fn four_patches_on_a_448_grid() {
    let dir = tempfile::tempdir().unwrap();
    let he = synthetic_tissue(448, 448, 5).unwrap();
    let mueller = MuellerImage::filled(448, 448, &MuellerMatrix::identity());
    let sources = [("he", PatchSource::Gray(&he)), ("mueller", PatchSource::Mueller(&mueller))];
    let (grid, records) = extract_patches(&sources, &full_mask(448, 448, true), &PatchConfig::default(), dir.path()).unwrap();
    assert_eq!(grid.origins, vec![(0, 0), (224, 0), (0, 224), (224, 224)]);
    assert_eq!(records.len(), 8);
    let lines = fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
    assert_eq!(lines.lines().count(), 8);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    for key in ["origin_x", "origin_y", "modality", "path", "tissue_fraction"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    let patch = GrayImage::read_pgm(dir.path().join("he/224_0.pgm")).unwrap();
    assert_eq!((patch.width(), patch.height()), (224, 224));
    let mp = polarhe::io::read_pmm_file(dir.path().join("mueller/224_224.pmm")).unwrap();
    assert_eq!((mp.width, mp.height, mp.channels), (224, 224, 16));
}

#[test]
fn background_gives_no_patches() {
    let dir = tempfile::tempdir().unwrap();
    let he = GrayImage::filled(448, 448, 0.9).unwrap();
    let (grid, records) = extract_patches(&[("he", PatchSource::Gray(&he))], &full_mask(448, 448, false), &PatchConfig::default(), dir.path()).unwrap();
    assert_eq!(grid.origins.len(), 4);
    assert_eq!((grid.kept(), records.len()), (0, 0));
}

#[test]
fn kept_count_matches_window_scan() {
    let (w, h, p, stride) = (100, 80, 32, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mask = full_mask(w, h, false);
    // Left half tissue plus random specks.
    for y in 0..h {
        for x in 0..w {
            mask.mask[y * w + x] = x < w / 2 || rng.random_bool(0.1);
        }
    }
    let cfg = PatchConfig { patch_size: p, stride, min_tissue_fraction: 0.5 };
    let grid = TileGrid::new(&mask, &cfg).unwrap();
    let mut brute = 0;
    let mut y = 0;
    while y + p <= h {
        let mut x = 0;
        while x + p <= w {
            let mut n = 0;
            for yy in y..y + p {
                for xx in x..x + p {
                    n += mask.mask[yy * w + xx] as usize;
                }
            }
            if n as f64 / (p * p) as f64 >= 0.5 {
                brute += 1;
            }
            x += stride;
        }
        y += stride;
    }
    assert_eq!(grid.kept(), brute);
    assert!(brute > 0 && brute < grid.origins.len());
}

#[test]
fn mismatched_modalities_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = GrayImage::filled(50, 50, 0.5).unwrap();
    let b = GrayImage::filled(50, 40, 0.5).unwrap();
    let err = extract_patches(
        &[("a", PatchSource::Gray(&a)), ("b", PatchSource::Gray(&b))],
        &full_mask(50, 50, true),
        &PatchConfig { patch_size: 10, stride: 10, min_tissue_fraction: 0.1 },
        dir.path(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn pipeline_on_identical_pair() {
    let dir = tempfile::tempdir().unwrap();
    let img = synthetic_tissue(448, 448, 6).unwrap();
    let inputs = SlideInputs { he: img.clone(), polar: img, mueller: Some(MuellerImage::filled(448, 448, &MuellerMatrix::identity())) };
    let report = run_pipeline(&inputs, &PipelineSettings::default(), dir.path()).unwrap();
    assert_eq!((report.total_windows, report.kept_windows), (4, 4));
    assert_eq!(report.patch_files, 12);
    assert!(report.transform.dx.abs() < 0.5 && report.transform.dy.abs() < 0.5);
}

#[test]
fn pipeline_aligns_a_shifted_larger_he_image() {
    let dir = tempfile::tempdir().unwrap();
    let polar = synthetic_tissue(448, 448, 7).unwrap();
    // The H&E field of view is larger and offset; its content is the reference moved by (7, -3).
    let truth = RigidTransform::translation(7.0, -3.0);
    let he = resample_gray(&polar, &truth, (480, 464)).unwrap().image;
    let inputs = SlideInputs { he, polar: polar.clone(), mueller: None };
    let report = run_pipeline(&inputs, &PipelineSettings::default(), dir.path()).unwrap();
    assert!((report.transform.dx - 7.0).abs() <= 1.0 && (report.transform.dy + 3.0).abs() <= 1.0, "{:?}", report.transform);
    assert!(report.transform.rotation.abs() < 0.5f64.to_radians());
    assert!(report.kept_windows > 0);
    assert_eq!(report.patch_files, 2 * report.kept_windows);
    let a = GrayImage::read_pgm(dir.path().join("he/0_0.pgm")).unwrap();
    let b = GrayImage::read_pgm(dir.path().join("polar/0_0.pgm")).unwrap();
    let interior: Vec<bool> = (0..224 * 224).map(|i| i % 224 > 10 && i / 224 > 10).collect();
    assert!(masked_ncc(&a, &b, &interior) > 0.95);
}

#[test]
fn wrap_angle_is_half_open() {
    for k in -5..=5 {
        let t = wrap_angle(0.3 + 2.0 * PI * k as f64);
        assert!((t - 0.3).abs() < 1e-9);
    }
}

#[test]
fn registration_off_the_coarse_grid() {
    let reference = synthetic_tissue(192, 160, 8).unwrap();
    let truth = RigidTransform::new(-3.7f64.to_radians(), -4.6, 2.3, 1.02).unwrap();
    let moving = resample_gray(&reference, &truth, (192, 160)).unwrap().image;
    let r = register_rigid(&moving, &reference, &SearchBounds::default()).unwrap();
    let t = r.transform;
    assert!((t.rotation - truth.rotation).abs() <= 0.2f64.to_radians(), "{t:?}");
    assert!((t.dx - truth.dx).abs() <= 0.5 && (t.dy - truth.dy).abs() <= 0.5, "{t:?}");
    assert!((t.scale - truth.scale).abs() <= 0.005, "{t:?}");
    assert!(r.score > 0.95);
}
