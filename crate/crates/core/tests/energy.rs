use drillrig::drill::{build_drill_rotation, DrillField};
use drillrig::energy::*;
use drillrig::grid::*;
use drillrig::{exp_so3, Rotation, SurfaceSpec, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn plane(n: usize) -> SurfaceBundle<f64> {
    let s = SurfaceSpec::plane();
    sample_surface(&s, &DomainGrid::over(&s.domain, n, n).unwrap()).unwrap()
}

fn random_state(b: &SurfaceBundle<f64>, seed: u64, amp: f64) -> ShellState<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = || Vec3::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
    let g = *b.grid();
    let m: Vec<_> = b.positions().values().iter().map(|y| *y + v()).collect();
    let r: Vec<_> = b.darboux.values().iter().map(|q| q.compose(&exp_so3(v()))).collect();
    ShellState::new(Field::from_values(g, m).unwrap(), Field::from_values(g, r).unwrap()).unwrap()
}

fn random_direction(n: usize, seed: u64) -> Gradient<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = || Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    Gradient {
        m: (0..n).map(|_| v()).collect(),
        w: (0..n).map(|_| v()).collect(),
    }
}

fn full_params() -> MaterialParams<f64> {
    MaterialParams::new(1.0, 0.7, 0.8, 0.2, 0.3, 1.0).unwrap()
}

#[test]
fn secant_check_on_random_states() {
    let b = plane(9);
    let p = full_params();
    for seed in 0..5 {
        let s = random_state(&b, seed, 0.1);
        let grad = fd_gradient(&s, &p, &b, None).unwrap();
        let d = random_direction(b.grid().len(), 100 + seed);
        let eps = 1e-5;
        let ep = total_energy(&retract(&s, &d, eps), &p, &b).unwrap().total;
        let em = total_energy(&retract(&s, &d, -eps), &p, &b).unwrap().total;
        let secant = (ep - em) / (2.0 * eps);
        let dot = grad.dot(&d);
        assert!((dot - secant).abs() <= 1e-5 * secant.abs(), "{dot} {secant}");
    }
}

#[test]
fn clamped_entries_are_zero() {
    let b = plane(7);
    let mask = make_mask(b.grid(), "left_edge").unwrap();
    let s = random_state(&b, 3, 0.1);
    let g = fd_gradient(&s, &full_params(), &b, Some(&mask)).unwrap();
    for k in mask.gamma_nodes() {
        assert_eq!(g.m[k], Vec3::zero());
        assert_eq!(g.w[k], Vec3::zero());
    }
    assert!(g.norm_inf() > 0.0);
}

#[test]
fn zero_couple_modulus_forgets_initial_drill() {
    let b = plane(7);
    let p = MaterialParams::new(1.0, 0.5, 0.0, 0.1, 0.2, 2.0).unwrap();
    let g = *b.grid();
    let mut finals = Vec::new();
    for a in [0.1, 0.4] {
        let s0 = ShellState::with_drill(&b, &Field::constant(g, a)).unwrap();
        let out = minimize(&s0, &p, &b, None, &MinimizeOptions { gtol: 1e-9, ..Default::default() }).unwrap();
        let e = total_energy(&out.state, &p, &b).unwrap();
        assert_eq!(e.drill, 0.0);
        finals.push(e.total);
    }
    assert!(finals.iter().all(|e| *e < 1e-10), "{finals:?}");
}

#[test]
fn clamped_plane_relaxes_random_drill() {
    let b = plane(11);
    let mask = make_mask(b.grid(), "all").unwrap();
    let alpha = seeded_drill(b.grid(), Some(&mask), 0.2, 7);
    let s0 = ShellState::with_drill(&b, &alpha).unwrap();
    let p = MaterialParams::new(1.0, 1.0, 1.0, 0.1, 0.0, 0.0).unwrap();
    let opts = MinimizeOptions { drill_tol: Some(1e-4), ..Default::default() };
    let out = minimize(&s0, &p, &b, Some(&mask), &opts).unwrap();
    assert_eq!(out.termination, Termination::Drill);
    for w in out.trace.windows(2) {
        assert!(w[1].energy <= w[0].energy);
    }
    for k in mask.gamma_nodes() {
        assert_eq!(out.state.m.values()[k], b.positions().values()[k]);
    }
}

#[test]
fn seeded_drill_is_reproducible() {
    let g = DomainGrid::<f64>::new(5, 5, (0.0, 1.0), (0.0, 1.0)).unwrap();
    let a = seeded_drill(&g, None, 0.3, 11);
    assert_eq!(a, seeded_drill(&g, None, 0.3, 11));
    assert_ne!(a, seeded_drill(&g, None, 0.3, 12));
    assert!(a.values().iter().all(|v| v.abs() <= 0.3));
}

#[test]
fn associate_family_is_energy_flat() {
    let p = MaterialParams::new(1.0, 1.0, 1.0, 0.1, 0.0, 0.0).unwrap();
    let mut spread = Vec::new();
    for n in [21, 41] {
        let g = DomainGrid::new(n, n, (-1.0, 1.0), (0.0, 1.0)).unwrap();
        let cat = sample_surface(&SurfaceSpec::catenoid().with_domain(g.bounds()), &g).unwrap();
        let e0 = total_energy(&ShellState::reference(&cat), &p, &cat).unwrap().total;
        let mut worst: f64 = 0.0;
        for th in [0.3, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
            let xt = sample_surface(&SurfaceSpec::associate(th).with_domain(g.bounds()), &g).unwrap();
            let q = build_drill_rotation(&DrillField::constant(&cat, -th).unwrap());
            let r = q.zip_map(&cat.darboux, |a, b| a.compose(b)).unwrap();
            let s = ShellState::new(xt.positions(), r).unwrap();
            let drill = s.drill_angles(&cat);
            assert!(drill.values().iter().all(|a| (a + th).abs() < 1e-12));
            let e = total_energy(&s, &p, &cat).unwrap().total;
            worst = worst.max((e - e0).abs() / e0);
        }
        spread.push(worst);
    }
    assert!(spread[1] < 1e-3, "{spread:?}");
    assert!(spread[1] < spread[0] / 8.0, "{spread:?}");
}

#[test]
fn clamped_sphere_drill_hessian_bound() {
    let s = SurfaceSpec::sphere(1.0);
    let g = DomainGrid::over(&s.domain, 41, 41).unwrap();
    let b = sample_surface(&s, &g).unwrap();
    let mask = make_mask(&g, "left_edge").unwrap();
    let p = MaterialParams::new(1.0, 1.0, 1.0, 0.1, 0.0, 0.0).unwrap();
    let k = drill_hessian_probe(&b, &p, Some(&mask), 1e-4).unwrap();
    let bound = 2.0 * p.h * p.mu_c * b.area();
    assert!(k >= bound * (1.0 - 1e-2), "{k} {bound}");
}

fn rot_strategy() -> impl Strategy<Value = Rotation<f64>> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b, c)| exp_so3(Vec3::new(a, b, c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn frame_indifference(seed in 0u64..1000, qbar in rot_strategy(), t in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64)) {
        let b = plane(6);
        let p = full_params();
        let s = random_state(&b, seed, 0.3);
        let shift = Vec3::new(t.0, t.1, t.2);
        let moved = ShellState::new(
            s.m.map(|m| qbar.apply(*m) + shift),
            s.r.map(|r| qbar.compose(r)),
        ).unwrap();
        let e1 = total_energy(&s, &p, &b).unwrap();
        let e2 = total_energy(&moved, &p, &b).unwrap();
        for (a, c) in e1.parts().iter().zip(e2.parts()) {
            prop_assert!((a - c).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn terms_are_nonnegative(seed in 0u64..1000, lambda in 0.0..5.0f64, mu_c in 0.0..3.0f64, q in 0.0..3.0f64) {
        let b = plane(6);
        let p = MaterialParams::new(1.0, lambda, mu_c, 0.1, 0.5, q).unwrap();
        let e = total_energy(&random_state(&b, seed, 0.5), &p, &b).unwrap();
        prop_assert!(e.parts().iter().all(|v| *v >= 0.0));
        prop_assert!((e.total - e.parts().iter().sum::<f64>()).abs() <= 1e-14 * e.total.max(1.0));
    }
}
