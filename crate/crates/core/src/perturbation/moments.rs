//! Gaussian averages of trace monomials for `X = M M†`, `E[M_ab M̄_cd] = δ_ac δ_bd / N_r`.
//!
//! Two independent engines: explicit pairing enumeration (small degree) and the
//! loop equations obtained by Gaussian integration by parts (any degree).

use std::collections::HashMap;

use num_traits::One;

use super::poly::{q, BivariatePoly, Q};
use super::trace::{TraceMonomial, TracePolynomial};
use crate::error::{LvrError, Result};
use crate::exec::Execution;

/// Largest total degree accepted by [`wick_moment`] (8! pairings).
pub const WICK_MAX_DEGREE: u32 = 8;

fn cycles(perm: &[usize]) -> i32 {
    let mut seen = vec![false; perm.len()];
    let mut c = 0;
    for s in 0..perm.len() {
        if !seen[s] {
            c += 1;
            let mut k = s;
            while !seen[k] {
                seen[k] = true;
                k = perm[k];
            }
        }
    }
    c
}

/// `⟨mono⟩` by summing over all pairings of the `M` legs with the `M†` legs.
///
/// Pairing `σ` contributes `N_l^{c(γσ)} N_r^{c(σ) - d}`, where `γ` cycles the legs
/// inside each trace: left indices are glued along `γσ`, right indices along `σ`.
pub fn wick_moment(mono: &TraceMonomial) -> Result<BivariatePoly> {
    wick_moment_with(mono, Execution::default())
}

pub fn wick_moment_with(mono: &TraceMonomial, exec: Execution) -> Result<BivariatePoly> {
    let d = mono.degree();
    if d > WICK_MAX_DEGREE {
        return Err(LvrError::DegreeTooLarge { degree: d, max: WICK_MAX_DEGREE });
    }
    let d = d as usize;
    let zeros = BivariatePoly::n_l_pow(mono.zeros() as i32);
    if d == 0 {
        return Ok(zeros);
    }
    let mut gamma = vec![0; d];
    let mut off = 0;
    for &p in mono.powers() {
        let p = p as usize;
        for t in 0..p {
            gamma[off + t] = off + (t + 1) % p;
        }
        off += p;
    }
    // Split the pairings by the image of leg 0; each branch enumerates the rest.
    let partial = exec.map(d, |first| {
        let mut counts: HashMap<(i32, i32), u64> = HashMap::new();
        let mut sigma = vec![usize::MAX; d];
        let mut used = vec![false; d];
        sigma[0] = first;
        used[first] = true;
        fn rec(k: usize, sigma: &mut [usize], used: &mut [bool], gamma: &[usize], counts: &mut HashMap<(i32, i32), u64>) {
            let d = sigma.len();
            if k == d {
                let gs: Vec<usize> = sigma.iter().map(|&s| gamma[s]).collect();
                let key = (cycles(&gs), cycles(sigma) - d as i32);
                *counts.entry(key).or_insert(0) += 1;
                return;
            }
            for j in 0..d {
                if !used[j] {
                    used[j] = true;
                    sigma[k] = j;
                    rec(k + 1, sigma, used, gamma, counts);
                    used[j] = false;
                }
            }
        }
        rec(1, &mut sigma, &mut used, &gamma, &mut counts);
        counts
    });
    let mut merged: std::collections::BTreeMap<(i32, i32), u64> = Default::default();
    for c in partial {
        for (k, v) in c {
            *merged.entry(k).or_insert(0) += v;
        }
    }
    let total = merged
        .into_iter()
        .fold(BivariatePoly::zero(), |acc, ((i, j), n)| &acc + &BivariatePoly::term(i, j, q(n as i64)));
    Ok(&total * &zeros)
}

/// Memoized loop-equation evaluator.
///
/// With `Ω` the remaining factors,
/// `⟨Tr X^k Ω⟩ = N_r^{-1} [Σ_{m=1}^{k} ⟨t(m-1) Tr X^{k-m} Ω⟩ + Σ_i p_i ⟨Tr X^{k+p_i-1} Ω_{∖i}⟩]`
/// where `t(0) = N_r` (the trace of the identity on the right index) and `t(j) = Tr X^j`.
#[derive(Debug, Default)]
pub struct MomentEngine {
    memo: HashMap<TraceMonomial, BivariatePoly>,
}

impl MomentEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn moment(&mut self, mono: &TraceMonomial) -> BivariatePoly {
        if let Some(v) = self.memo.get(mono) {
            return v.clone();
        }
        let value = self.compute(mono);
        self.memo.insert(mono.clone(), value.clone());
        value
    }

    fn compute(&mut self, mono: &TraceMonomial) -> BivariatePoly {
        let zeros = mono.zeros() as i32;
        let Some(&k) = mono.powers().last() else {
            return BivariatePoly::n_l_pow(zeros);
        };
        let rest = mono.without(k).expect("factor present");
        let mut acc = BivariatePoly::zero();
        for m in 1..=k {
            let lower = TraceMonomial::new(&[k - m]).mul(&rest);
            if m == 1 {
                acc = &acc + &(&BivariatePoly::n_r() * &self.moment(&lower));
            } else {
                acc = &acc + &self.moment(&lower.mul(&TraceMonomial::single(m - 1)));
            }
        }
        let mut seen = Vec::new();
        for &pi in rest.powers() {
            if seen.contains(&pi) {
                continue;
            }
            seen.push(pi);
            let mult = rest.powers().iter().filter(|&&x| x == pi).count() as i64;
            let merged = rest.without(pi).expect("factor present").mul(&TraceMonomial::single(k + pi - 1));
            acc = &acc + &self.moment(&merged).scale(&q(mult * pi as i64));
        }
        &acc * &BivariatePoly::n_r_pow(-1)
    }

    /// `⟨P⟩` for a trace polynomial.
    pub fn expect(&mut self, p: &TracePolynomial) -> BivariatePoly {
        p.terms().fold(BivariatePoly::zero(), |acc, (m, c)| &acc + &(c * &self.moment(m)))
    }
}

/// `⟨mono⟩` at any degree via the loop equations.
pub fn gaussian_moment(mono: &TraceMonomial) -> BivariatePoly {
    MomentEngine::new().moment(mono)
}

/// The Schwinger–Dyson family `Σ_{k+l=p₁-1} (Tr X^k)(Tr X^l) · Ω`.
pub fn sd_pattern(p1: u32, omega: &TraceMonomial) -> TracePolynomial {
    let mut out = TracePolynomial::zero();
    for k in 0..p1 {
        out.add_term(TraceMonomial::new(&[k, p1 - 1 - k]).mul(omega), BivariatePoly::one());
    }
    out
}

/// Right-hand side of the square-case Schwinger–Dyson identity for one pattern.
///
/// `⟨Σ_{k+l=p₁-1} (Tr X^k)(Tr X^l) Ω⟩ = N ⟨Tr X^{p₁} Ω⟩ - Σ_i p_i ⟨Tr X^{p₁+p_i-1} Ω_{∖i}⟩`.
pub fn sd_rhs(p1: u32, omega: &TraceMonomial) -> TracePolynomial {
    let mut out = TracePolynomial::monomial(TraceMonomial::single(p1).mul(omega), BivariatePoly::n_l());
    let factors = omega.factors();
    for (i, &pi) in factors.iter().enumerate() {
        if pi == 0 {
            continue;
        }
        let mut rest = factors.clone();
        rest.remove(i);
        rest.push(p1 + pi - 1);
        out.add_term(TraceMonomial::new(&rest), BivariatePoly::constant(-q(pi as i64)));
    }
    out
}

/// Rewrites `c · Σ_{k+l=p₁-1} (Tr X^k)(Tr X^l) Ω` into fewer traces (square case).
///
/// The pattern `(p₁, Ω)` and the common coefficient `c` are recovered from `expr`;
/// anything else is a [`LvrError::PatternMismatch`].
pub fn sd_reduce(expr: &TracePolynomial) -> Result<TracePolynomial> {
    let (p1, omega, c) = match_sd_pattern(expr)?;
    Ok(sd_rhs(p1, &omega).scale_poly(&c))
}

pub fn match_sd_pattern(expr: &TracePolynomial) -> Result<(u32, TraceMonomial, BivariatePoly)> {
    // The k = 0 term (Tr X⁰)(Tr X^{p₁-1})Ω carries a Tr X⁰; try every such term as the anchor.
    for (m, _) in expr.terms() {
        if m.zeros() > 0 {
            if let Some(found) = match_anchor(expr, m) {
                return Ok(found);
            }
        }
    }
    Err(LvrError::PatternMismatch(format!("{expr} is not of the form c Σ_(k+l=p-1) (TrX^k)(TrX^l) Ω")))
}

fn match_anchor(expr: &TracePolynomial, m: &TraceMonomial) -> Option<(u32, TraceMonomial, BivariatePoly)> {
    let cm = expr.coeff(m);
    let after_zero = m.without(0)?;
    let mut candidates = after_zero.factors();
    candidates.sort_unstable();
    candidates.dedup();
    for l in candidates {
        let omega = after_zero.without(l).expect("factor present");
        let pattern = sd_pattern(l + 1, &omega);
        let Some(mult) = pattern.coeff(m).terms().next().map(|(_, v)| v.clone()) else { continue };
        let c = cm.scale(&(Q::one() / mult));
        if pattern.scale_poly(&c) == *expr {
            return Some((l + 1, omega, c));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::poly::q_ratio;

    fn nl() -> BivariatePoly {
        BivariatePoly::n_l()
    }

    #[test]
    fn first_moments() {
        assert_eq!(wick_moment(&TraceMonomial::single(1)).unwrap(), nl());
        let x2 = &nl() + &BivariatePoly::term(2, -1, q(1));
        assert_eq!(wick_moment(&TraceMonomial::single(2)).unwrap(), x2);
        assert_eq!(wick_moment(&TraceMonomial::new(&[0])).unwrap(), nl());
        assert_eq!(gaussian_moment(&TraceMonomial::single(2)), x2);
    }

    #[test]
    fn scalar_moments_are_factorials() {
        // N_l = N_r = 1: ⟨|z|^{2n}⟩ = n!.
        let one = q(1);
        for n in 1..=8u32 {
            let w = wick_moment(&TraceMonomial::single(n)).unwrap().eval(&one, &one);
            let fact: i64 = (1..=n as i64).product();
            assert_eq!(w, q(fact));
        }
    }

    #[test]
    fn engines_agree_up_to_degree_eight() {
        let monos = [
            vec![4],
            vec![2, 2],
            vec![1, 1, 1],
            vec![3, 2, 1],
            vec![0, 4, 3],
            vec![2, 2, 2, 2],
            vec![5, 3],
            vec![1, 7],
        ];
        for m in monos {
            let mono = TraceMonomial::new(&m);
            assert_eq!(wick_moment(&mono).unwrap(), gaussian_moment(&mono), "{mono}");
        }
        let big = TraceMonomial::new(&[5, 4]);
        assert!(matches!(wick_moment(&big), Err(LvrError::DegreeTooLarge { degree: 9, max: 8 })));
    }

    #[test]
    fn schwinger_dyson_examples() {
        let mut eng = MomentEngine::new();
        for p in 2..=4 {
            let lhs = sd_pattern(p, &TraceMonomial::unit());
            let reduced = sd_reduce(&lhs).unwrap();
            assert_eq!(reduced, TracePolynomial::monomial(TraceMonomial::single(p), nl()));
            assert_eq!(eng.expect(&lhs).square(), eng.expect(&reduced).square());
        }
        // p₁ = 1: (Tr X⁰)² → N Tr X... with Ω empty that is N ⟨Tr X⟩.
        let lhs = sd_pattern(1, &TraceMonomial::unit());
        assert_eq!(lhs, TracePolynomial::monomial(TraceMonomial::new(&[0, 0]), BivariatePoly::one()));
        assert_eq!(eng.expect(&lhs).square(), eng.expect(&sd_reduce(&lhs).unwrap()).square());
        // Three traces with a scaled pattern.
        let lhs = sd_pattern(3, &TraceMonomial::single(2)).scale(&q_ratio(3, 2));
        let red = sd_reduce(&lhs).unwrap();
        assert_eq!(eng.expect(&lhs).square(), eng.expect(&red).square());
        let bad = TracePolynomial::monomial(TraceMonomial::new(&[1, 2]), nl());
        assert!(matches!(sd_reduce(&bad), Err(LvrError::PatternMismatch(_))));
    }
}
