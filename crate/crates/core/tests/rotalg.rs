use drillrig::rotalg::orthonormality_defect;
use drillrig::{anti, axl, exp_so3, extract_angle, polar3, rodrigues, Mat3, Vec3};
use proptest::prelude::*;
use std::f64::consts::PI;

fn unit() -> impl Strategy<Value = Vec3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("away from zero", |(a, b, c)| a * a + b * b + c * c > 1e-2)
        .prop_map(|(a, b, c)| {
            let v = Vec3::new(a, b, c);
            v * (1.0 / v.norm())
        })
}

fn matrix() -> impl Strategy<Value = Mat3<f64>> {
    prop::array::uniform9(-2.0..2.0f64).prop_map(|a| Mat3::from_fn(|i, j| a[3 * i + j]))
}

proptest! {
    #[test]
    fn rodrigues_is_rotation(alpha in -10.0..10.0f64, n in unit()) {
        let q = rodrigues(alpha, n).unwrap();
        prop_assert!(orthonormality_defect(q.matrix()) <= 1e-13);
        prop_assert!((q.matrix().det() - 1.0).abs() <= 1e-13);
        prop_assert!((q.apply(n) - n).norm() <= 1e-13);
    }

    #[test]
    fn trace_identity(alpha in -10.0..10.0f64, n in unit()) {
        let q = rodrigues(alpha, n).unwrap();
        prop_assert!((q.matrix().trace() - (2.0 * alpha.cos() + 1.0)).abs() <= 1e-12);
    }

    #[test]
    fn extraction_roundtrip(alpha in -PI + 1e-9..PI, n in unit(), k in -3i32..3) {
        let q = rodrigues(alpha, n).unwrap();
        let hint = alpha + 2.0 * PI * k as f64;
        let e = extract_angle(&q, n, hint).unwrap();
        prop_assert!((e.alpha - hint).abs() <= 1e-10);
        prop_assert!((e.sin_a - alpha.sin()).abs() <= 1e-12);
        prop_assert!((e.cos_a - alpha.cos()).abs() <= 1e-12);
    }

    #[test]
    fn reversed_axis_negates_angle(alpha in -3.0..3.0f64, n in unit()) {
        let q = rodrigues(alpha, n).unwrap();
        let e = extract_angle(&q, -n, -alpha).unwrap();
        prop_assert!((e.alpha + alpha).abs() <= 1e-10);
    }

    #[test]
    fn exponential_matches_rodrigues(alpha in -3.0..3.0f64, n in unit()) {
        let a = exp_so3(n * alpha);
        let b = rodrigues(alpha, n).unwrap();
        prop_assert!((*a.matrix() - *b.matrix()).max_abs() <= 1e-13);
    }

    #[test]
    fn anti_axl_roundtrip(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, w in unit()) {
        let v = Vec3::new(a, b, c);
        prop_assert_eq!(axl(&anti(v)).unwrap(), v);
        prop_assert!((anti(v).mul_vec(w) - v.cross(w)).norm() <= 1e-13);
    }

    #[test]
    fn polar_factors(f in matrix()) {
        prop_assume!(f.det() > 1e-2);
        let (r, u) = polar3(&f).unwrap();
        prop_assert!(orthonormality_defect(r.matrix()) <= 1e-9);
        prop_assert!((r.matrix().det() - 1.0).abs() <= 1e-9);
        prop_assert!((*r.matrix() * u - f).max_abs() <= 1e-9 * (1.0 + f.max_abs()));
        prop_assert!((u - u.transpose()).max_abs() <= 1e-12);
    }

    #[test]
    fn polar_of_scaled_rotation(alpha in -3.0..3.0f64, n in unit(), s in 0.1..10.0f64) {
        let q = rodrigues(alpha, n).unwrap();
        let (r, u) = polar3(&q.matrix().scale(s)).unwrap();
        prop_assert!((*r.matrix() - *q.matrix()).max_abs() <= 1e-10);
        prop_assert!((u - Mat3::identity().scale(s)).max_abs() <= 1e-9 * s);
    }
}

#[test]
fn single_precision_rodrigues() {
    let q = rodrigues(0.7f32, Vec3::new(0.0, 0.6, 0.8)).unwrap();
    assert!((q.matrix().trace() - (2.0 * 0.7f32.cos() + 1.0)).abs() < 1e-5);
    let e = extract_angle(&q, Vec3::new(0.0, 0.6, 0.8), 0.0).unwrap();
    assert!((e.alpha - 0.7).abs() < 1e-5);
}
