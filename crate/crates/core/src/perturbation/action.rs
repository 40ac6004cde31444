//! Small-`λ` expansion of the loop vertex action and of `log Z`.
//!
//! `S` is expanded mechanically: `a(λ, x) = Σ_n FC(n) (-λ)^n x^{(p-1)n+1}` is
//! substituted into `-Σ_{ij} log(1 + λ Σ_k a_i^k a_j^{p-1-k})` (and the vector piece),
//! the logarithm is expanded as a power series, and every `x^α y^β` becomes
//! `(Tr X^α)(Tr X^β)`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::moments::MomentEngine;
use super::poly::{q, q_ratio, BivariatePoly, Q};
use super::trace::{TraceMonomial, TracePolynomial};
use crate::error::{LvrError, Result};
use crate::fuss_catalan::fc_number;
use crate::oracle::Representation;

pub const MAX_ORDER: usize = 2;

/// Polynomial in `(x, y)` for each power of `λ` up to a fixed order.
#[derive(Debug, Clone)]
struct Series {
    coeffs: Vec<BTreeMap<(u32, u32), Q>>,
}

impl Series {
    fn zero(order: usize) -> Self {
        Series { coeffs: vec![BTreeMap::new(); order + 1] }
    }

    fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0].insert((0, 0), Q::one());
        s
    }

    fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn add_assign(&mut self, o: &Series, scale: &Q) {
        for (n, c) in o.coeffs.iter().enumerate() {
            for (k, v) in c {
                *self.coeffs[n].entry(*k).or_insert_with(Q::zero) += v * scale;
            }
        }
    }

    fn mul(&self, o: &Series) -> Series {
        let order = self.order();
        let mut out = Series::zero(order);
        for (n1, c1) in self.coeffs.iter().enumerate() {
            for (n2, c2) in o.coeffs.iter().enumerate().take(order + 1 - n1) {
                for (&(a1, b1), v1) in c1 {
                    for (&(a2, b2), v2) in c2 {
                        *out.coeffs[n1 + n2].entry((a1 + a2, b1 + b2)).or_insert_with(Q::zero) += v1 * v2;
                    }
                }
            }
        }
        out
    }

    fn pow(&self, k: u32) -> Series {
        (0..k).fold(Series::one(self.order()), |acc, _| acc.mul(self))
    }

    /// Multiplies by `λ`, dropping the top order.
    fn shift(&self) -> Series {
        let mut out = Series::zero(self.order());
        for n in 0..self.order() {
            out.coeffs[n + 1] = self.coeffs[n].clone();
        }
        out
    }

    /// `log(1 + u)` for a series `u` without constant term.
    fn log1p(&self) -> Series {
        let order = self.order();
        let mut out = Series::zero(order);
        let mut power = Series::one(order);
        for m in 1..=order {
            power = power.mul(self);
            let sign = if m % 2 == 1 { 1 } else { -1 };
            out.add_assign(&power, &q_ratio(sign, m as i64));
        }
        out
    }
}

/// `a(λ, x)` (or the same in `y`) as a series.
fn a_series(p: u32, order: usize, in_y: bool) -> Result<Series> {
    let mut s = Series::zero(order);
    for n in 0..=order {
        let c = Q::from_integer(BigInt::from(fc_number(p, n as u32)?)) * q(if n % 2 == 0 { 1 } else { -1 });
        let e = (p - 1) * n as u32 + 1;
        let key = if in_y { (0, e) } else { (e, 0) };
        s.coeffs[n].insert(key, c);
    }
    Ok(s)
}

/// The coefficients `S_1, …, S_order` of `S = Σ_n λ^n S_n` for general `N_l ≤ N_r`.
///
/// `Tr X⁰` factors are kept explicit; the vector piece carries the prefactor `N_r - N_l`.
pub fn effective_action_series(p: u32, order: usize) -> Result<Vec<TracePolynomial>> {
    if p < 2 {
        return Err(LvrError::InvalidParameter(format!("p = {p} must be at least 2")));
    }
    if order == 0 || order > MAX_ORDER {
        return Err(LvrError::InvalidParameter(format!("order must be in 1..={MAX_ORDER} (got {order})")));
    }
    let ax = a_series(p, order, false)?;
    let ay = a_series(p, order, true)?;
    let mut sigma = Series::zero(order);
    for k in 0..p {
        sigma.add_assign(&ax.pow(k).mul(&ay.pow(p - 1 - k)), &Q::one());
    }
    let mat = sigma.shift().log1p();
    let vec = ax.pow(p - 1).shift().log1p();
    let extra = &BivariatePoly::n_r() - &BivariatePoly::n_l();
    let mut out = Vec::with_capacity(order);
    for n in 1..=order {
        let mut s = TracePolynomial::zero();
        for (&(a, b), c) in &mat.coeffs[n] {
            s.add_term(TraceMonomial::new(&[a, b]), BivariatePoly::constant(-c.clone()));
        }
        for (&(a, _), c) in &vec.coeffs[n] {
            s.add_term(TraceMonomial::single(a), extra.scale(&-c.clone()));
        }
        out.push(s);
    }
    Ok(out)
}

fn n() -> BivariatePoly {
    BivariatePoly::n_l()
}

fn tr2(a: u32, b: u32) -> TraceMonomial {
    TraceMonomial::new(&[a, b])
}

/// `S_1 = -2N Tr X^{p-1} - Σ_{k=1}^{p-2} (Tr X^k)(Tr X^{p-1-k})` (square case).
pub fn s1_closed_form(p: u32) -> TracePolynomial {
    let mut s = TracePolynomial::monomial(TraceMonomial::single(p - 1), n().scale(&q(-2)));
    for k in 1..p - 1 {
        s.add_term(tr2(k, p - 1 - k), BivariatePoly::constant(q(-1)));
    }
    s
}

/// `S_2 = N(2p-1) Tr X^{2p-2} + Σ_{k=1}^{p-2} (2p-1-k)(Tr X^k)(Tr X^{2p-2-k}) + (p/2)(Tr X^{p-1})²`.
pub fn s2_closed_form(p: u32) -> TracePolynomial {
    let mut s = TracePolynomial::monomial(TraceMonomial::single(2 * p - 2), n().scale(&q(2 * p as i64 - 1)));
    for k in 1..p - 1 {
        s.add_term(tr2(k, 2 * p - 2 - k), BivariatePoly::constant(q((2 * p - 1 - k) as i64)));
    }
    s.add_term(tr2(p - 1, p - 1), BivariatePoly::constant(q_ratio(p as i64, 2)));
    s
}

/// Coefficients `m_1, m_2` of `Z/Z_0 = 1 + m_1 λ + m_2 λ² + …`.
pub fn z_series(p: u32, order: usize, rep: Representation, engine: &mut MomentEngine) -> Result<Vec<BivariatePoly>> {
    if order == 0 || order > MAX_ORDER {
        return Err(LvrError::InvalidParameter(format!("order must be in 1..={MAX_ORDER} (got {order})")));
    }
    let mut m = Vec::with_capacity(order);
    match rep {
        Representation::Original => {
            let mut fact = 1i64;
            for k in 1..=order {
                fact *= k as i64;
                let sign = if k % 2 == 1 { -1 } else { 1 };
                let mono = TraceMonomial::new(&vec![p; k]);
                let c = BivariatePoly::n_r_pow(k as i32).scale(&q_ratio(sign, fact));
                m.push(&engine.moment(&mono) * &c);
            }
        }
        Representation::Lvr => {
            let s = effective_action_series(p, order)?;
            m.push(engine.expect(&s[0]));
            if order >= 2 {
                let e2 = s[1].add(&s[0].mul(&s[0]).scale(&q_ratio(1, 2)));
                m.push(engine.expect(&e2));
            }
        }
    }
    Ok(m)
}

/// Connected coefficients `c_1, c_2` of `log(Z/Z_0) = c_1 λ + c_2 λ² + …`.
pub fn logz_series(p: u32, order: usize, rep: Representation) -> Result<Vec<BivariatePoly>> {
    let mut engine = MomentEngine::new();
    let m = z_series(p, order, rep, &mut engine)?;
    let mut c = vec![m[0].clone()];
    if order >= 2 {
        c.push(&m[1] - &(&m[0] * &m[0]).scale(&q_ratio(1, 2)));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_action_matches_rectangular_form() {
        // S = -λ(N_l+N_r) Tr X + λ²{(3/2)(N_l+N_r) Tr X² + (Tr X)²}.
        let s = effective_action_series(2, 2).unwrap();
        let sum = &BivariatePoly::n_l() + &BivariatePoly::n_r();
        let s1 = TracePolynomial::monomial(TraceMonomial::single(1), -&sum);
        assert_eq!(s[0].absorb_zeros(), s1);
        let mut s2 = TracePolynomial::monomial(TraceMonomial::single(2), sum.scale(&q_ratio(3, 2)));
        s2.add_term(tr2(1, 1), BivariatePoly::one());
        assert_eq!(s[1].absorb_zeros(), s2);
    }

    #[test]
    fn closed_forms_match_expansion() {
        for p in 2..=6 {
            let s = effective_action_series(p, 2).unwrap();
            assert_eq!(s[0].absorb_zeros().square(), s1_closed_form(p), "S1, p = {p}");
            assert_eq!(s[1].absorb_zeros().square(), s2_closed_form(p), "S2, p = {p}");
        }
    }

    #[test]
    fn cubic_closed_forms() {
        let nn = || BivariatePoly::n_l();
        let mut s1 = TracePolynomial::monomial(TraceMonomial::single(2), nn().scale(&q(-2)));
        s1.add_term(tr2(1, 1), BivariatePoly::constant(q(-1)));
        assert_eq!(s1_closed_form(3), s1);
        let mut s2 = TracePolynomial::monomial(TraceMonomial::single(4), nn().scale(&q(5)));
        s2.add_term(tr2(1, 3), BivariatePoly::constant(q(4)));
        s2.add_term(tr2(2, 2), BivariatePoly::constant(q_ratio(3, 2)));
        assert_eq!(s2_closed_form(3), s2);
    }

    #[test]
    fn scalar_z_coefficients_are_factorial_ratios() {
        let one = q(1);
        for p in 2..=6u32 {
            let mut engine = MomentEngine::new();
            for rep in [Representation::Original, Representation::Lvr] {
                let m = z_series(p, 2, rep, &mut engine).unwrap();
                let f = |k: u32| (1..=k as i64).product::<i64>();
                assert_eq!(m[0].eval(&one, &one), q(-f(p)), "p = {p}");
                assert_eq!(m[1].eval(&one, &one), q_ratio(f(2 * p), 2), "p = {p}");
            }
        }
    }

    #[test]
    fn scalar_connected_coefficients() {
        let one = q(1);
        let c = logz_series(2, 2, Representation::Original).unwrap();
        assert_eq!(c[0].eval(&one, &one), q(-2));
        assert_eq!(c[1].eval(&one, &one), q(10));
    }

    #[test]
    fn representations_agree_exactly() {
        for p in 2..=4 {
            let a = logz_series(p, 2, Representation::Original).unwrap();
            let b = logz_series(p, 2, Representation::Lvr).unwrap();
            assert_eq!(a, b, "p = {p}");
        }
    }
}
