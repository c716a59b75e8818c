use drillrig::grid::{fd_derivative, integrate, make_mask, sample_surface, Dir, DomainGrid, Field};
use drillrig::{SurfaceSpec, Vec3};
use proptest::prelude::*;

fn sup_error(n: usize, a: f64, b: f64, dir: Dir) -> f64 {
    let g = DomainGrid::new(n, n, (0.0, 1.0), (0.0, 1.0)).unwrap();
    let f = Field::from_fn(g, |x1, x2| (a * x1 + b * x2).sin());
    let d = fd_derivative(&f, dir).unwrap();
    let c = if dir == Dir::X1 { a } else { b };
    d.values()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let (x1, x2) = g.point(k);
            (v - c * (a * x1 + b * x2).cos()).abs()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fd_is_second_order(a in 0.5..3.0f64, b in 0.5..3.0f64) {
        for dir in [Dir::X1, Dir::X2] {
            let (e1, e2, e3) = (sup_error(21, a, b, dir), sup_error(41, a, b, dir), sup_error(81, a, b, dir));
            prop_assert!((e1 / e2).log2() >= 1.8, "{} {}", e1, e2);
            prop_assert!((e2 / e3).log2() >= 1.8, "{} {}", e2, e3);
        }
    }

    #[test]
    fn quadratics_differentiate_exactly(c in prop::array::uniform6(-3.0..3.0f64), n1 in 3usize..12, n2 in 3usize..12) {
        let g = DomainGrid::new(n1, n2, (-1.0, 2.0), (0.5, 1.5)).unwrap();
        let f = Field::from_fn(g, |x, y| c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y);
        let d1 = fd_derivative(&f, Dir::X1).unwrap();
        for (k, v) in d1.values().iter().enumerate() {
            let (x, y) = g.point(k);
            prop_assert!((v - (c[1] + 2.0 * c[3] * x + c[4] * y)).abs() <= 1e-10);
        }
    }

    #[test]
    fn csv_round_trip(seed in prop::collection::vec(-1e6..1e6f64, 12)) {
        let g = DomainGrid::new(3, 4, (0.0, 1.0), (-2.0, 3.0)).unwrap();
        let f = Field::from_values(g, seed.chunks(1).map(|c| Vec3::new(c[0], -c[0], c[0] * 1e-9)).collect()).unwrap();
        let back: Field<f64, Vec3<f64>> = Field::from_csv(&f.to_csv(&[("k", "v".into())])).unwrap();
        prop_assert_eq!(back, f);
    }
}

#[test]
fn trapezoid_integrates_bilinear_exactly() {
    let g = DomainGrid::new(7, 5, (0.0, 2.0), (1.0, 3.0)).unwrap();
    let f = Field::from_fn(g, |x: f64, y: f64| 1.0 + x + 2.0 * y + x * y);
    // ∫∫ over [0,2]×[1,3]
    assert!((integrate(&f) - 32.0).abs() < 1e-12);
}

#[test]
fn sphere_area_converges() {
    let s = SurfaceSpec::sphere(1.0);
    let g = DomainGrid::over(&s.domain, 81, 81).unwrap();
    let b = sample_surface(&s, &g).unwrap();
    let want = std::f64::consts::PI * 2.0 * 0.2f64.cos();
    assert!((b.area() - want).abs() < 1e-3);
}

#[test]
fn grid_outside_surface_domain_refused() {
    let s = SurfaceSpec::<f64>::plane();
    let g = DomainGrid::new(5, 5, (0.0, 2.0), (0.0, 1.0)).unwrap();
    assert!(sample_surface(&s, &g).is_err());
}

#[test]
fn left_edge_mask() {
    let g = DomainGrid::<f64>::new(6, 4, (0.0, 1.0), (0.0, 1.0)).unwrap();
    let m = make_mask(&g, "left_edge").unwrap();
    assert_eq!(m.gamma_nodes(), vec![0, 6, 12, 18]);
}
