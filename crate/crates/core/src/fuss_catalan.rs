//! Fuss–Catalan numbers and the generating function `T_p`.
//!
//! `T_p(z)` is the root of `z T^p - T + 1 = 0` with `T_p(0) = 1`. It is analytic
//! on the plane cut along `[R_p, ∞)`, `R_p = (p-1)^{p-1} / p^p`. Inside
//! `|z| < R_p / 2` the cached power series is summed directly; elsewhere the root
//! is tracked from a series-valid anchor by predictor–corrector continuation.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{LvrError, Result};
use crate::quadrature;
use crate::C64;

/// `C(pn, n) / ((p-1)n + 1)`, the number of p-ary trees with `n` internal nodes.
pub fn fc_number(p: u32, n: u32) -> Result<BigUint> {
    if p < 2 {
        return Err(LvrError::InvalidParameter(format!("p = {p} must be at least 2")));
    }
    let (p, n) = (p as u64, n as u64);
    let mut binom = BigUint::one();
    for k in 0..n {
        binom *= p * n - k;
        binom /= k + 1;
    }
    let den = BigUint::from((p - 1) * n + 1);
    debug_assert!((&binom % &den).is_zero());
    Ok(binom / den)
}

/// `R_p = (p-1)^{p-1} / p^p`, where the cut of `T_p` starts.
pub fn cut_start(p: u32) -> f64 {
    let num = BigUint::from(p - 1).pow(p - 1);
    let den = BigUint::from(p).pow(p);
    // Ratio of exact integers, rounded once.
    let ratio = num_rational::Ratio::new(num, den);
    ratio.to_f64().expect("finite ratio")
}

/// Evaluator for `T_p` on the cut plane.
#[derive(Debug, Clone)]
pub struct FcEvaluator {
    p: u32,
    series_coeffs: Vec<BigUint>,
    series_f64: Vec<f64>,
    cut_start: f64,
    pub tol_residual: f64,
    pub tol_cut: f64,
    pub path_step: f64,
}

const DEFAULT_N_MAX: u32 = 60;
const NEWTON_MAX_ITER: usize = 8;

impl FcEvaluator {
    pub fn new(p: u32) -> Result<Self> {
        Self::with_n_max(p, DEFAULT_N_MAX)
    }

    pub fn with_n_max(p: u32, n_max: u32) -> Result<Self> {
        if p < 2 {
            return Err(LvrError::InvalidParameter(format!("p = {p} must be at least 2")));
        }
        let series_coeffs = (0..=n_max)
            .map(|n| fc_number(p, n))
            .collect::<Result<Vec<_>>>()?;
        let series_f64 = series_coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::INFINITY))
            .collect();
        let r = cut_start(p);
        Ok(FcEvaluator {
            p,
            series_coeffs,
            series_f64,
            cut_start: r,
            tol_residual: 1e-12,
            tol_cut: 1e-9,
            path_step: 0.05 * r,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn cut_start(&self) -> f64 {
        self.cut_start
    }

    pub fn series_coeffs(&self) -> &[BigUint] {
        &self.series_coeffs
    }

    /// Residual of the defining equation.
    pub fn residual(&self, z: C64, t: C64) -> f64 {
        (z * t.powi(self.p as i32) - t + 1.0).norm()
    }

    pub fn distance_to_cut(&self, z: C64) -> f64 {
        if z.re >= self.cut_start {
            z.im.abs()
        } else {
            (z - self.cut_start).norm()
        }
    }

    fn check_cut(&self, z: C64) -> Result<()> {
        if self.distance_to_cut(z) < self.tol_cut {
            return Err(LvrError::CutProximity {
                re: z.re,
                im: z.im,
                cut_start: self.cut_start,
                tol: self.tol_cut,
            });
        }
        Ok(())
    }

    fn in_series_disk(&self, z: C64) -> bool {
        z.norm() < 0.5 * self.cut_start
    }

    /// Truncated power series; only accurate for `|z| < R_p / 2`.
    pub fn series(&self, z: C64) -> C64 {
        self.series_f64
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `T_p(z)` on the principal branch.
    pub fn eval(&self, z: C64) -> Result<C64> {
        self.check_cut(z)?;
        if self.in_series_disk(z) {
            return Ok(self.series(z));
        }
        let path = self.default_path(z);
        self.continue_along(&path)
    }

    /// Like [`FcEvaluator::eval`], but returns the limit `p/(p-1)` at the branch point `z = R_p` itself.
    pub fn eval_closure(&self, z: C64) -> Result<C64> {
        if z.im == 0.0 && (z.re - self.cut_start).abs() <= 4.0 * f64::EPSILON * self.cut_start {
            return Ok(C64::new(self.p as f64 / (self.p - 1) as f64, 0.0));
        }
        self.eval(z)
    }

    /// `T_p` at the last waypoint, continued along the given polyline.
    ///
    /// The first waypoint must lie in the series disk. Segments may not cross the cut.
    pub fn eval_along(&self, waypoints: &[C64]) -> Result<C64> {
        let (first, last) = match (waypoints.first(), waypoints.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(LvrError::InvalidParameter("empty continuation path".into())),
        };
        if !self.in_series_disk(first) {
            return Err(LvrError::InvalidParameter(format!(
                "path must start inside |z| < {}",
                0.5 * self.cut_start
            )));
        }
        for w in waypoints.windows(2) {
            if self.segment_crosses_cut(w[0], w[1]) {
                return Err(LvrError::InvalidParameter(format!(
                    "segment {} -> {} crosses the cut",
                    w[0], w[1]
                )));
            }
        }
        self.check_cut(last)?;
        self.continue_along(waypoints)
    }

    fn segment_crosses_cut(&self, a: C64, b: C64) -> bool {
        if a.im.signum() == b.im.signum() && a.im != 0.0 && b.im != 0.0 {
            return false;
        }
        if a.im == b.im {
            // Segment on the real axis: only the endpoints matter.
            return a.im == 0.0 && a.re.max(b.re) >= self.cut_start;
        }
        let s = a.im / (a.im - b.im);
        let x = a.re + s * (b.re - a.re);
        // Touching the axis at an endpoint counts only if it is the interior of the walk.
        x >= self.cut_start && s > 0.0 && s < 1.0
    }

    fn default_path(&self, z: C64) -> Vec<C64> {
        let r = self.cut_start;
        if z.re <= 0.5 * r {
            vec![z * (0.25 * r / z.norm()), z]
        } else if z.im == 0.0 {
            vec![C64::new(0.25 * r, 0.0), z]
        } else {
            let s = z.im.signum();
            let h = z.im.abs().max(0.5 * r);
            vec![
                C64::new(0.0, 0.4 * r * s),
                C64::new(z.re, s * h),
                z,
            ]
        }
    }

    fn newton(&self, z: C64, mut t: C64) -> Option<(C64, usize)> {
        let p = self.p as i32;
        let mut last_step = f64::INFINITY;
        for it in 0..NEWTON_MAX_ITER {
            let tp1 = t.powi(p - 1);
            let f = z * tp1 * t - t + 1.0;
            let df = z * tp1 * (p as f64) - 1.0;
            let dt = f / df;
            let step = dt.norm();
            if !step.is_finite() || (it > 0 && step > 0.5 * last_step && step > 1e-15 * (1.0 + t.norm())) {
                return None;
            }
            if it == 0 && step > 0.1 * (1.0 + t.norm()) {
                return None;
            }
            t -= dt;
            last_step = step;
            if step <= 1e-15 * (1.0 + t.norm()) {
                return Some((t, it + 1));
            }
        }
        let scale = 1.0 + z.norm() * t.norm().powi(p);
        (self.residual(z, t) <= self.tol_residual * scale).then_some((t, NEWTON_MAX_ITER))
    }

    fn slope(&self, z: C64, t: C64) -> C64 {
        let p = self.p as i32;
        let tp1 = t.powi(p - 1);
        tp1 * t / (1.0 - z * tp1 * (p as f64))
    }

    fn continue_along(&self, waypoints: &[C64]) -> Result<C64> {
        let mut z = waypoints[0];
        let mut t = self.series(z);
        let total: f64 = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let mut travelled = 0.0;
        let mut h = self.path_step;
        for w in waypoints.windows(2) {
            let target = w[1];
            let len = (target - w[0]).norm();
            if len == 0.0 {
                continue;
            }
            let dir = (target - w[0]) / len;
            let mut remaining = len;
            while remaining > 0.0 {
                let floor = 1e-14 * (1.0 + z.norm());
                // Keep the step well inside the distance to the branch point.
                let limit = 0.5 * (z - self.cut_start).norm();
                let mut step = h.min(limit).min(remaining);
                if remaining - step < floor {
                    step = remaining;
                }
                if step < floor && step < remaining {
                    return Err(LvrError::ContinuationFailure {
                        at: travelled / total,
                        reason: format!("step {step:e} below floor near z = {z}"),
                    });
                }
                let z_next = if step == remaining { target } else { z + dir * step };
                let pred = t + self.slope(z, t) * (z_next - z);
                match self.newton(z_next, pred) {
                    Some((t_next, iters)) => {
                        z = z_next;
                        t = t_next;
                        remaining = if step == remaining { 0.0 } else { remaining - step };
                        travelled += step;
                        if iters <= 3 {
                            h *= 2.0;
                        }
                    }
                    None => h = 0.5 * step,
                }
            }
        }
        let scale = 1.0 + z.norm() * t.norm().powi(self.p as i32);
        let res = self.residual(z, t);
        if res > self.tol_residual * scale {
            return Err(LvrError::ContinuationFailure {
                at: 1.0,
                reason: format!("final residual {res:e}"),
            });
        }
        Ok(t)
    }

    /// `T_p'(z) = T^p / (1 - p z T^{p-1})`.
    pub fn deriv(&self, z: C64) -> Result<C64> {
        let t = self.eval(z)?;
        self.deriv_from(z, t)
    }

    fn deriv_from(&self, z: C64, t: C64) -> Result<C64> {
        let p = self.p as i32;
        let tp1 = t.powi(p - 1);
        let den = 1.0 - z * tp1 * (p as f64);
        if den.norm() < 1e-12 {
            return Err(LvrError::BranchPoint(den.norm()));
        }
        Ok(tp1 * t / den)
    }

    fn coupling_arg(&self, lambda: C64, u: C64) -> C64 {
        -lambda * u.powi(self.p as i32 - 1)
    }

    /// `a(λ, u) = u T_p(-λ u^{p-1})`, the root of `u = a + λ a^p` near `u`.
    pub fn a_eval(&self, lambda: C64, u: C64) -> Result<C64> {
        Ok(u * self.eval(self.coupling_arg(lambda, u))?)
    }

    /// `∂_λ a(λ, u) = -u^p T_p'(-λ u^{p-1})`.
    pub fn a_dt(&self, lambda: C64, u: C64) -> Result<C64> {
        let z = self.coupling_arg(lambda, u);
        Ok(-u.powi(self.p as i32) * self.deriv(z)?)
    }

    /// `∂_u a(λ, u) = T + (p-1) z T'` at `z = -λ u^{p-1}`.
    pub fn a_du(&self, lambda: C64, u: C64) -> Result<C64> {
        let z = self.coupling_arg(lambda, u);
        let t = self.eval(z)?;
        let dt = self.deriv_from(z, t)?;
        Ok(t + dt * z * (self.p as f64 - 1.0))
    }

    /// Value and λ-derivative of `a` from a single continuation.
    pub fn a_with_dt(&self, lambda: C64, u: C64) -> Result<(C64, C64)> {
        let z = self.coupling_arg(lambda, u);
        let t = self.eval(z)?;
        let dt = self.deriv_from(z, t)?;
        Ok((u * t, -u.powi(self.p as i32) * dt))
    }
}

/// Fitted constant of the decay bounds `|T| ≤ K(1+|z|)^{-1/p}`, `|T'| ≤ K(1+|z|)^{-1-1/p}`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub p: u32,
    pub k: f64,
    pub worst_z: C64,
    pub samples: usize,
}

pub fn decay_bound_report(eval: &FcEvaluator, samples: &[C64]) -> Result<DecayReport> {
    if samples.is_empty() {
        return Err(LvrError::InvalidParameter("no decay samples".into()));
    }
    let inv_p = 1.0 / eval.p() as f64;
    let mut k = 0.0;
    let mut worst_z = samples[0];
    for &z in samples {
        let t = eval.eval(z)?;
        let dt = eval.deriv_from(z, t)?;
        let scale = 1.0 + z.norm();
        let kz = (t.norm() * scale.powf(inv_p)).max(dt.norm() * scale.powf(1.0 + inv_p));
        if kz > k {
            k = kz;
            worst_z = z;
        }
    }
    Ok(DecayReport {
        p: eval.p(),
        k,
        worst_z,
        samples: samples.len(),
    })
}

/// The `n`th moment of the density `(1/2π)√((4-x)/x)` on `[0, 4]`, by adaptive quadrature.
///
/// The substitution `x = 4 sin²θ` turns the endpoint singularities into the smooth
/// integrand `(4 sin²θ)^n (4/π) cos²θ` on `[0, π/2]`.
pub fn catalan_moment(n: u32) -> Result<f64> {
    let est = quadrature::adaptive(
        |th: f64| {
            let s = th.sin();
            let c = th.cos();
            (4.0 * s * s).powi(n as i32) * (4.0 / std::f64::consts::PI) * c * c
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        0.0,
        1e-13,
        500,
    )?;
    Ok(est.value)
}

/// Relative deviation of the moment from `Catalan(n)`. Fails above `1e-8`.
pub fn moment_cross_check(n: u32) -> Result<f64> {
    if n > 20 {
        return Err(LvrError::InvalidParameter(format!("n = {n} exceeds 20")));
    }
    let exact = fc_number(2, n)?.to_f64().expect("small integer");
    let got = catalan_moment(n)?;
    let rel = (got - exact).abs() / exact;
    if rel > 1e-8 {
        return Err(LvrError::QuadratureFailure(format!(
            "moment {n}: {got} vs {exact} (rel {rel:e})"
        )));
    }
    Ok(rel)
}

/// Count p-ary trees with n internal nodes by splitting off the root.
pub fn count_pary_trees(p: usize, n: usize) -> u128 {
    let mut t = vec![0u128; n + 1];
    t[0] = 1;
    for m in 1..=n {
        // Distribute m-1 internal nodes over p ordered subtrees.
        let mut ways = vec![0u128; m];
        ways[0] = 1;
        for _ in 0..p {
            let mut next = vec![0u128; m];
            for (a, &w) in ways.iter().enumerate() {
                for b in 0..(m - a) {
                    next[a + b] += w * t[b];
                }
            }
            ways = next;
        }
        t[m] = ways[m - 1];
    }
    t[n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fc_numbers_match_tree_counts() {
        for p in 2..=5u32 {
            for n in 0..=10u32 {
                let got = fc_number(p, n).unwrap();
                assert_eq!(got, BigUint::from(count_pary_trees(p as usize, n as usize)), "p={p} n={n}");
            }
        }
        assert_eq!(fc_number(2, 4).unwrap(), BigUint::from(14u32));
        assert_eq!(fc_number(3, 2).unwrap(), BigUint::from(3u32));
        assert!(fc_number(1, 3).is_err());
    }

    #[test]
    fn series_head_is_one_one() {
        for p in 2..=6 {
            let e = FcEvaluator::new(p).unwrap();
            assert_eq!(e.series_coeffs()[0], BigUint::one());
            assert_eq!(e.series_coeffs()[1], BigUint::one());
        }
        assert_eq!(cut_start(2), 0.25);
        assert!((cut_start(3) - 4.0 / 27.0).abs() < 1e-17);
    }

    #[test]
    fn closed_form_p2() {
        let e = FcEvaluator::new(2).unwrap();
        let t = e.eval(c(0.25 - 1e-3, 0.0)).unwrap();
        let z: f64 = 0.25 - 1e-3;
        let want = (1.0 - (1.0 - 4.0 * z).sqrt()) / (2.0 * z);
        assert!((t.re - want).abs() < 1e-12);
        assert_eq!(e.eval(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert!(matches!(
            e.eval(c(0.25, 0.0)),
            Err(LvrError::CutProximity { .. })
        ));
        assert!(matches!(e.eval(c(0.3, 0.0)), Err(LvrError::CutProximity { .. })));
        assert_eq!(e.eval_closure(c(0.25, 0.0)).unwrap(), c(2.0, 0.0));
        assert!(e.eval_closure(c(0.3, 0.0)).is_err());
        let e3 = FcEvaluator::new(3).unwrap();
        let t3 = e3.eval_closure(c(cut_start(3), 0.0)).unwrap();
        assert!(e3.residual(c(cut_start(3), 0.0), t3) < 1e-15);
    }

    #[test]
    fn cubic_real_root() {
        let e = FcEvaluator::new(3).unwrap();
        let t = e.eval(c(-1.0, 0.0)).unwrap();
        // Bisection for T^3 + T = 1.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid * mid + mid - 1.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((t.re - lo).abs() < 1e-13 && t.im.abs() < 1e-14);
        assert!((lo - 0.682_327_803_828_019_3).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_difference() {
        let e = FcEvaluator::new(3).unwrap();
        let z = c(0.05, 0.0);
        let h = 1e-6;
        let fd = (e.eval(z + h).unwrap() - e.eval(z - h).unwrap()) / (2.0 * h);
        let d = e.deriv(z).unwrap();
        assert!((fd - d).norm() / d.norm() < 1e-6);

        let e2 = FcEvaluator::new(2).unwrap();
        assert!((e2.deriv(c(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-15);
        // d/dz of (1 - sqrt(1-4z)) / (2z) at z = -4.
        let z = -4.0f64;
        let s = (1.0 - 4.0 * z).sqrt();
        let want = (2.0 * z / s - (1.0 - s)) / (2.0 * z * z);
        let got = e2.deriv(c(z, 0.0)).unwrap();
        assert!((got.re - want).abs() < 1e-13 && got.im.abs() < 1e-14);
    }

    #[test]
    fn branch_point_is_rejected() {
        let e = FcEvaluator::new(2).unwrap();
        let z = c(0.25, 0.0);
        let t = c(2.0, 0.0);
        assert!(matches!(e.deriv_from(z, t), Err(LvrError::BranchPoint(_))));
    }

    #[test]
    fn a_eval_examples() {
        let e = FcEvaluator::new(2).unwrap();
        let lam = c(0.1, 0.0);
        let a = e.a_eval(lam, c(1.0, 0.0)).unwrap();
        let want = (-1.0 + (1.0f64 + 0.4).sqrt()) / 0.2;
        assert!((a.re - want).abs() < 1e-13);
        assert!((a.re - 0.916_079_783).abs() < 1e-9);
        let u = c(0.7, -0.3);
        assert_eq!(e.a_eval(c(0.0, 0.0), u).unwrap(), u);

        // a = u - λu^p + pλ²u^{2p-1} + O(λ³).
        for p in 2..=5u32 {
            let e = FcEvaluator::new(p).unwrap();
            let l = 1e-3;
            let got = e.a_eval(c(l, 0.0), c(1.0, 0.0)).unwrap().re;
            let series = 1.0 - l + p as f64 * l * l;
            assert!((got - series).abs() / series < 1e-6);
        }
    }

    #[test]
    fn a_derivatives_match_difference() {
        let e = FcEvaluator::new(3).unwrap();
        let lam = c(0.05, 0.03);
        let u = c(1.3, 0.2);
        let h = 1e-6;
        let fd_l = (e.a_eval(lam + h, u).unwrap() - e.a_eval(lam - h, u).unwrap()) / (2.0 * h);
        let fd_u = (e.a_eval(lam, u + h).unwrap() - e.a_eval(lam, u - h).unwrap()) / (2.0 * h);
        assert!((fd_l - e.a_dt(lam, u).unwrap()).norm() < 1e-8);
        assert!((fd_u - e.a_du(lam, u).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn custom_path_rejects_cut_crossing() {
        let e = FcEvaluator::new(2).unwrap();
        let path = [c(0.0, 0.05), c(1.0, 0.1), c(1.0, -0.1)];
        assert!(matches!(e.eval_along(&path), Err(LvrError::InvalidParameter(_))));
        let path = [c(0.0, 0.05), c(1.0, 0.1)];
        let t = e.eval_along(&path).unwrap();
        assert!((t - e.eval(c(1.0, 0.1)).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn moments_are_catalan() {
        assert!(moment_cross_check(0).unwrap() < 1e-12);
        assert!((catalan_moment(3).unwrap() - 5.0).abs() < 1e-10);
        assert!((catalan_moment(10).unwrap() - 16796.0).abs() < 1e-6);
        for n in 0..=20 {
            moment_cross_check(n).unwrap();
        }
        assert!(moment_cross_check(21).is_err());
    }

    #[test]
    fn decay_on_negative_ray() {
        let e = FcEvaluator::new(2).unwrap();
        let samples: Vec<C64> = (0..1000).map(|k| c(-(k as f64) * 0.5, 0.0)).collect();
        let rep = decay_bound_report(&e, &samples).unwrap();
        assert!(rep.k.is_finite() && rep.k >= 1.0);
        assert!(decay_bound_report(&e, &[]).is_err());
    }
}
