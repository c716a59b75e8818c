use drillrig::drill::{
    associate_verify, drill_residual, obstruction_report, rigidity_certificate, Classification, DrillField,
    ResidualMode,
};
use drillrig::grid::{make_mask, sample_surface, DomainGrid, SurfaceBundle};
use drillrig::{Error, Expr, SurfaceSpec};
use proptest::prelude::*;

fn bundle(spec: SurfaceSpec<f64>, n: usize) -> SurfaceBundle<f64> {
    let g = DomainGrid::over(&spec.domain, n, n).unwrap();
    sample_surface(&spec, &g).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sphere_normal_coefficient(alpha in -3.0..3.0f64, rho in 0.5..3.0f64) {
        prop_assume!(alpha.sin().abs() > 0.05);
        let b = bundle(SurfaceSpec::sphere(rho), 41);
        let d = drill_residual(&DrillField::constant(&b, alpha).unwrap(), ResidualMode::Exact).unwrap();
        prop_assert_eq!(d.classification, Classification::Obstructed);
        let h = b.grid().h1().max(b.grid().h2());
        for k in b.grid().interior() {
            let j = &b.jets.values()[k];
            let want = -2.0 * alpha.sin() * b.mean_curvature.values()[k] * j.area_element();
            prop_assert!((d.coeffs.values()[k].cn - want).abs() <= 5.0 * h * h * rho);
        }
    }

    #[test]
    fn catenoid_constant_angle_is_unobstructed(alpha in -3.0..3.0f64) {
        prop_assume!(alpha.sin().abs() > 1e-3);
        let b = bundle(SurfaceSpec::catenoid(), 21);
        let df = DrillField::constant(&b, alpha).unwrap();
        let d = drill_residual(&df, ResidualMode::Exact).unwrap();
        prop_assert_eq!(d.classification, Classification::ConstantAngleMinimal);
        let o = obstruction_report(&df, ResidualMode::Exact, 1e-6).unwrap();
        prop_assert!(!o.impossible);
        prop_assert!(o.analytic_residual_linf <= 1e-12);
    }

    #[test]
    fn associate_angle_is_minus_theta(theta in 0.0..6.28f64) {
        let g = DomainGrid::new(21, 21, (-1.0, 1.0), (0.0, 6.0)).unwrap();
        let r = associate_verify(theta, &g).unwrap();
        prop_assert!(r.passes(1e-10, 1e-9));
        prop_assert!((r.drill_angle + theta).abs() <= 1e-9);
    }
}

#[test]
fn classification_of_scenario_cases() {
    let plane = bundle(SurfaceSpec::plane(), 11);
    let zero = drill_residual(&DrillField::constant(&plane, 0.0).unwrap(), ResidualMode::Exact).unwrap();
    assert_eq!(zero.classification, Classification::RigidIdentity);
    let flipped = drill_residual(&DrillField::constant(&plane, std::f64::consts::PI).unwrap(), ResidualMode::Exact).unwrap();
    assert_eq!(flipped.classification, Classification::Flipped);
    let ramp = Expr::parse("0.3*x1").unwrap();
    let d = drill_residual(&DrillField::from_expr(&plane, &ramp).unwrap(), ResidualMode::Exact).unwrap();
    assert_eq!(d.classification, Classification::Obstructed);
}

#[test]
fn obstructed_drill_is_refused_by_rigidity_certificate() {
    let b = bundle(SurfaceSpec::sphere(1.0), 21);
    let mask = make_mask(b.grid(), "left_edge").unwrap();
    let df = DrillField::constant(&b, 0.5).unwrap();
    assert!(matches!(rigidity_certificate(&b, &df, Some(&mask)), Err(Error::Incompatible { .. })));
    let df = DrillField::constant(&b, 0.0).unwrap();
    let r = rigidity_certificate(&b, &df, Some(&mask)).unwrap();
    assert!(r.rigid && r.deviation == 0.0);
}

#[test]
fn linearized_residual_is_first_order_accurate() {
    let b = bundle(SurfaceSpec::sphere(1.0), 21);
    let gap = |eps: f64| {
        let df = DrillField::constant(&b, eps).unwrap();
        let e = drill_residual(&df, ResidualMode::Exact).unwrap();
        let l = drill_residual(&df, ResidualMode::Linearized).unwrap();
        e.residual
            .values()
            .iter()
            .zip(l.residual.values())
            .fold(0.0f64, |m, (a, c)| m.max((*a - *c).norm()))
    };
    let (g1, g2) = (gap(1e-2), gap(5e-3));
    assert!((g1 / g2).log2() > 1.9, "{g1} {g2}");
}

#[test]
fn single_precision_pipeline() {
    let s = SurfaceSpec::<f32>::sphere(1.0);
    let g = DomainGrid::over(&s.domain, 11, 11).unwrap();
    let b = sample_surface(&s, &g).unwrap();
    let d = drill_residual(&DrillField::constant(&b, 0.5f32).unwrap(), ResidualMode::Exact).unwrap();
    assert_eq!(d.classification, Classification::Obstructed);
}
