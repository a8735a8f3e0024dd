use std::f64::consts::{FRAC_PI_2, PI};

use polarhe::polarimetry::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
struct Composed {
    m00: f64,
    theta: f64,
    retardance: f64,
    axis: [f64; 3],
    depol: [f64; 3],
    d: [f64; 3],
}

impl Composed {
    fn matrix(&self) -> MuellerMatrix {
        let [a, b, c] = self.depol;
        (MuellerMatrix::rotation(self.theta)
            * MuellerMatrix::retarder(self.retardance, self.axis)
            * MuellerMatrix::depolarizer(a, b, c)
            * MuellerMatrix::diattenuator(self.d))
        .scaled(self.m00)
    }
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn random_composed(rng: &mut ChaCha8Rng) -> Composed {
    let mut dir = || loop {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-2 && n2 <= 1.0 {
            break unit(v);
        }
    };
    let axis = dir();
    let d_dir = dir();
    let d_mag = rng.random_range(0.0..0.9);
    Composed {
        m00: rng.random_range(0.1..2.0),
        theta: rng.random_range(-PI..PI),
        retardance: rng.random_range(0.0..PI),
        axis,
        depol: [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)],
        d: d_dir.map(|x| x * d_mag),
    }
}

fn composed_strategy() -> impl Strategy<Value = Composed> {
    any::<u64>().prop_map(|seed| random_composed(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Difference of two orientations modulo a half turn, in `[0, π/2]`.
fn axis_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

#[test]
fn factors_remultiply_for_a_thousand_composed_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let c = random_composed(&mut rng);
        let m = c.matrix();
        let dec = lu_chipman_decompose(&m).unwrap();
        worst = worst.max(dec.product().scaled(c.m00).frobenius_distance(&m));
    }
    assert!(worst <= 1e-8, "worst Frobenius error {worst}");
}

#[test]
fn canonical_elements() {
    let qwp = derive_properties(&MuellerMatrix::linear_retarder(FRAC_PI_2, 0.3)).unwrap();
    assert!((qwp.retardance - FRAC_PI_2).abs() <= 1e-9);
    assert!((qwp.fast_axis - 0.3).abs() <= 1e-9);
    assert!(qwp.depolarization.abs() <= 1e-9);
    let depol = derive_properties(&MuellerMatrix::diag(1.0, 0.4, 0.4, 0.4)).unwrap();
    assert!((depol.depolarization - 0.6).abs() <= 1e-9);
    assert!(depol.retardance.abs() <= 1e-9);
}

#[test]
fn polarizer_is_rejected() {
    let err = lu_chipman_decompose(&MuellerMatrix::linear_polarizer(0.2)).unwrap_err();
    assert!(matches!(err, DecompositionFailure::Diattenuation(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reconstruction(c in composed_strategy()) {
        let m = c.matrix();
        let dec = lu_chipman_decompose(&m).unwrap();
        prop_assert!(dec.product().scaled(c.m00).frobenius_distance(&m) <= 1e-8);
    }

    // First rows of the rotation, retarder and depolarizer are (1, 0, 0, 0), so the
    // diattenuation vector survives the composition untouched.
    #[test]
    fn diattenuator_recovered(c in composed_strategy()) {
        let dec = lu_chipman_decompose(&c.matrix()).unwrap();
        let expected = MuellerMatrix::diattenuator(c.d);
        prop_assert!(dec.diattenuator.frobenius_distance(&expected) <= 1e-10);
    }

    #[test]
    fn retarder_factor_is_a_proper_rotation(c in composed_strategy()) {
        let r = lu_chipman_decompose(&c.matrix()).unwrap().retarder;
        let rt = r.transpose();
        prop_assert!((r * rt).frobenius_distance(&MuellerMatrix::identity()) <= 1e-10);
        let b = |i: usize, j: usize| r.m[i + 1][j + 1];
        let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
            - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
            + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
        prop_assert!((det - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn pure_retarder_properties(r in 1e-3..(PI - 1e-3), axis in -FRAC_PI_2..FRAC_PI_2) {
        let p = derive_properties(&MuellerMatrix::linear_retarder(r, axis)).unwrap();
        prop_assert!((p.retardance - r).abs() <= 1e-9);
        prop_assert!(axis_distance(p.fast_axis, axis) <= 1e-8);
        prop_assert!(p.depolarization.abs() <= 1e-12);
    }

    #[test]
    fn properties_in_range(c in composed_strategy()) {
        let p = derive_properties(&c.matrix()).unwrap();
        prop_assert!((0.0..=PI).contains(&p.retardance));
        prop_assert!((-FRAC_PI_2..FRAC_PI_2).contains(&p.fast_axis));
        prop_assert!((0.0..=1.0).contains(&p.depolarization));
    }

    #[test]
    fn rotation_equivariance(c in composed_strategy(), phi in -PI..PI) {
        let m = c.matrix();
        let p = derive_properties(&m).unwrap();
        let q = derive_properties(&m.rotated(phi)).unwrap();
        prop_assert!((p.retardance - q.retardance).abs() <= 1e-8);
        prop_assert!((p.depolarization - q.depolarization).abs() <= 1e-10);
        // The orientation is only well defined away from zero and half-wave retardance.
        if p.retardance > 1e-3 && p.retardance < PI - 1e-3 {
            let dec = lu_chipman_decompose(&m).unwrap().retarder;
            let linear = (dec.m[2][3] - dec.m[3][2]).hypot(dec.m[3][1] - dec.m[1][3]);
            if linear > 1e-3 {
                prop_assert!(axis_distance(q.fast_axis, p.fast_axis + phi) <= 1e-6,
                    "axis {} rotated by {} gave {}", p.fast_axis, phi, q.fast_axis);
            }
        }
    }
}
