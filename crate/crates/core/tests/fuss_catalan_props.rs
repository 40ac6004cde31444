use lvr_core::fuss_catalan::FcEvaluator;
use lvr_core::C64;
use proptest::prelude::*;

fn cut_plane_point(p: u32) -> impl Strategy<Value = C64> {
    let r = lvr_core::fuss_catalan::cut_start(p);
    (0.0f64..10.0, -std::f64::consts::PI..std::f64::consts::PI)
        .prop_map(|(m, a)| C64::from_polar(m, a))
        .prop_filter("away from the cut", move |z| {
            let d = if z.re >= r { z.im.abs() } else { (z - r).norm() };
            d >= 1e-3
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn functional_equation_residual((p, z) in (2u32..=5).prop_flat_map(|p| (Just(p), cut_plane_point(p)))) {
        let e = FcEvaluator::new(p).unwrap();
        let t = e.eval(z).unwrap();
        prop_assert!(e.residual(z, t) <= 1e-10, "z = {z}, residual {}", e.residual(z, t));
    }

    #[test]
    fn negative_axis_positive(p in 2u32..=5, x in 0.0f64..1e4) {
        let e = FcEvaluator::new(p).unwrap();
        let t = e.eval(C64::new(-x, 0.0)).unwrap();
        prop_assert!(t.re > 0.0 && t.im.abs() < 1e-14 * t.re.max(1.0));
    }

    #[test]
    fn continuation_agrees_with_series_on_annulus(
        p in 2u32..=5,
        m in 0.3f64..0.45,
        a in -std::f64::consts::PI..std::f64::consts::PI,
    ) {
        let e = FcEvaluator::new(p).unwrap();
        let r = e.cut_start();
        let z = C64::from_polar(m * r, a);
        let s = e.series(z);
        // Route the continuation from a point well inside the disk.
        let t = e.eval_along(&[z * 0.5, z]).unwrap();
        prop_assert!((s - t).norm() <= 1e-12, "z = {z}: {s} vs {t}");
    }

    #[test]
    fn branch_consistency(
        p in 2u32..=5,
        m in 0.6f64..10.0,
        a in 0.05f64..(std::f64::consts::PI - 0.05),
        sign in prop::bool::ANY,
    ) {
        let e = FcEvaluator::new(p).unwrap();
        let r = e.cut_start();
        let s = if sign { 1.0 } else { -1.0 };
        let z = C64::from_polar(m, s * a);
        // Round the far side of the origin versus a direct detour through the same half plane.
        let left = [
            C64::new(-0.3 * r, 0.0),
            C64::new(-2.0 * m, 0.0),
            C64::new(-2.0 * m, s * 2.0 * m),
            z,
        ];
        let above = [C64::new(0.0, s * 0.3 * r), C64::new(0.0, s * 3.0 * m), z];
        let t1 = e.eval_along(&left).unwrap();
        let t2 = e.eval_along(&above).unwrap();
        prop_assert!((t1 - t2).norm() <= 1e-10, "z = {z}: {t1} vs {t2}");
        prop_assert!((t1 - e.eval(z).unwrap()).norm() <= 1e-10);
    }

    #[test]
    fn a_solves_scalar_equation(
        p in 2u32..=4,
        lm in 0.0f64..0.1,
        la in -2.0f64..2.0,
        um in 0.0f64..5.0,
        ua in -0.05f64..0.05,
    ) {
        let e = FcEvaluator::new(p).unwrap();
        let lambda = C64::from_polar(lm, la);
        let u = C64::from_polar(um, ua);
        prop_assume!(e.distance_to_cut(-lambda * u.powi(p as i32 - 1)) >= 1e-3);
        let a = e.a_eval(lambda, u).unwrap();
        let res = (a + lambda * a.powi(p as i32) - u).norm();
        prop_assert!(res <= 1e-10 * (1.0 + u.norm()), "res {res}");
    }
}
