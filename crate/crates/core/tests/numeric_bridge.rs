use lvr_core::oracle::{free_energy_coefficients, series_coefficients_n1, Representation};
use lvr_core::perturbation::logz_series;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn exact_coefficients_match_fitted_free_energy() {
    for p in [2u32, 3] {
        let exact = logz_series(p, 2, Representation::Original).unwrap();
        for n in [1usize, 2] {
            let norm = (n * n) as f64;
            let c1 = exact[0].eval_f64(n as f64, n as f64) / norm;
            let c2 = exact[1].eval_f64(n as f64, n as f64) / norm;
            let h = if p == 2 { 2e-3 } else { 2e-4 };
            for rep in [Representation::Original, Representation::Lvr] {
                let fit = free_energy_coefficients(p, n, n, rep, h, 6).unwrap();
                assert!(rel(fit[0], c1) < 1e-3, "p={p} N={n} {rep:?}: {} vs {c1}", fit[0]);
                assert!(rel(fit[1], c2) < 1e-3, "p={p} N={n} {rep:?}: {} vs {c2}", fit[1]);
            }
        }
    }
}

#[test]
fn scalar_z_series_is_factorial_ratio() {
    for p in [2u32, 3] {
        let c = series_coefficients_n1(p, 1e-4, 4).unwrap();
        let f = |k: u32| (1..=k as u64).product::<u64>() as f64;
        assert!(rel(c[0], -f(p)) < 1e-3, "p={p}: {}", c[0]);
        assert!(rel(c[1], f(2 * p) / 2.0) < 1e-3, "p={p}: {}", c[1]);
    }
}
