use std::f64::consts::PI;

use lvr_core::contour::{
    bound_integrals, make_infinite_keyhole, make_keyhole, verify_reconstruct_s, weight_phi, BoundConfig,
};
use lvr_core::exec::Execution;
use lvr_core::lvr_action::{Model, ModelParams, Spectrum};
use lvr_core::C64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn winding_is_zero_or_one(
        r in 0.05f64..0.5,
        extra in 1.0f64..8.0,
        psi in 0.1f64..1.2,
        rho in 0.0f64..1.0,
        theta in -PI..PI,
    ) {
        let big_r = r + extra;
        let g = make_keyhole(r, big_r, psi, 512).unwrap();
        // Keep the probe away from the contour so the quadrature stays resolved.
        let s = C64::from_polar(rho * 1.5 * big_r, theta);
        let near = g.sample_points(4000).iter().map(|w| (w - s).norm()).fold(f64::INFINITY, f64::min);
        prop_assume!(near > 0.1 * big_r);
        let w = g.winding(s);
        let expected = if g.encloses(s) { 1.0 } else { 0.0 };
        prop_assert!((w - expected).norm() < 1e-10, "winding {} at {} (expected {})", w, s, expected);
    }

    #[test]
    fn phi_symmetric_in_v(
        p in 2u32..=5,
        t_mod in 0.0f64..0.05,
        t_arg in -1.0f64..1.0,
        u in (0.5f64..3.0, -0.3f64..0.3),
        v1 in (0.3f64..2.5, -0.2f64..0.2),
        v2 in (0.3f64..2.5, -0.2f64..0.2),
    ) {
        let model = Model::new(ModelParams::square(p, C64::from_polar(0.05, t_arg), 1).unwrap()).unwrap();
        let t = C64::from_polar(t_mod, t_arg);
        let u = C64::from_polar(u.0, u.1);
        let v1 = C64::from_polar(v1.0, v1.1);
        let v2 = C64::from_polar(v2.0, v2.1);
        prop_assume!((v1 - u).norm() > 1e-3 && (v2 - u).norm() > 1e-3);
        let a = weight_phi(&model, t, u, v1, v2).unwrap();
        let b = weight_phi(&model, t, u, v2, v1).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
    }
}

#[test]
fn infinite_keyhole_decaying_integrand() {
    // f(w) = 1/((w - s)(w + 1)) decays like |w|^-2, so the missing outer arc is negligible.
    let g = make_infinite_keyhole(0.2, 0.4, 1e8, 4, 16, 4).unwrap();
    for s in [C64::new(3.0, 0.0), C64::new(0.0, 0.05), C64::new(40.0, 2.0)] {
        let got = g.integrate(|w| 1.0 / ((w - s) * (w + 1.0)));
        let expected = 1.0 / (s + 1.0);
        assert!((got - expected).norm() < 1e-6, "{got} vs {expected} at {s}");
    }
}

#[test]
fn reconstruction_grid() {
    let spectra: [&[f64]; 3] = [&[0.8], &[0.5, 1.2], &[0.3, 1.0, 2.1]];
    for p in [2, 3] {
        for spec in spectra {
            for arg in [0.0, PI / 2.0, -PI / 2.0] {
                let n = spec.len();
                let params = ModelParams::square(p, C64::from_polar(0.1, arg), n).unwrap();
                let model = Model::new(params).unwrap();
                let s = Spectrum::new(spec.to_vec()).unwrap();
                let rep = verify_reconstruct_s(&model, &s, 1e-5, Execution::Parallel)
                    .unwrap_or_else(|e| panic!("p={p} N={n} arg={arg}: {e}"));
                assert!(rep.rel_error <= 1e-5);
            }
        }
    }
}

#[test]
fn bound_integrals_decrease_along_ray() {
    let ray = C64::from_polar(1.0, 0.3);
    let mut prev: Option<[f64; 3]> = None;
    for mag in [0.1, 0.05, 0.025, 0.0125] {
        let params = ModelParams::square(3, ray * mag, 1).unwrap();
        let b = bound_integrals(&params, &BoundConfig::default(), Execution::Parallel).unwrap();
        let cur = [b.i1, b.i2, b.i3];
        assert!(cur.iter().all(|v| v.is_finite() && *v > 0.0), "{cur:?}");
        if let Some(pv) = prev {
            for j in 0..3 {
                assert!(cur[j] < pv[j], "I{} did not decrease at |λ| = {mag}: {} -> {}", j + 1, pv[j], cur[j]);
            }
        }
        prev = Some(cur);
    }
}
