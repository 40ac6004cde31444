//! Products of traces `Π Tr X^{p_i}` and their linear combinations.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::poly::{BivariatePoly, Q};

/// `(Tr X⁰)^zeros · Π_i Tr X^{p_i}` with the positive powers kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TraceMonomial {
    powers: Vec<u32>,
    zeros: u32,
}

impl TraceMonomial {
    pub fn unit() -> Self {
        TraceMonomial { powers: Vec::new(), zeros: 0 }
    }

    /// Zero entries become `Tr X⁰` factors.
    pub fn new(powers: &[u32]) -> Self {
        let zeros = powers.iter().filter(|&&p| p == 0).count() as u32;
        let mut powers: Vec<u32> = powers.iter().copied().filter(|&p| p > 0).collect();
        powers.sort_unstable();
        TraceMonomial { powers, zeros }
    }

    pub fn single(k: u32) -> Self {
        Self::new(&[k])
    }

    pub fn powers(&self) -> &[u32] {
        &self.powers
    }

    pub fn zeros(&self) -> u32 {
        self.zeros
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    pub fn trace_count(&self) -> usize {
        self.powers.len() + self.zeros as usize
    }

    /// All factors, zeros included.
    pub fn factors(&self) -> Vec<u32> {
        let mut v = vec![0; self.zeros as usize];
        v.extend_from_slice(&self.powers);
        v
    }

    pub fn mul(&self, o: &TraceMonomial) -> TraceMonomial {
        let mut f = self.factors();
        f.extend(o.factors());
        TraceMonomial::new(&f)
    }

    /// This monomial with one factor `Tr X^k` removed, if present.
    pub fn without(&self, k: u32) -> Option<TraceMonomial> {
        let mut f = self.factors();
        let pos = f.iter().position(|&x| x == k)?;
        f.remove(pos);
        Some(TraceMonomial::new(&f))
    }

    pub fn without_zeros(&self) -> TraceMonomial {
        TraceMonomial { powers: self.powers.clone(), zeros: 0 }
    }
}

impl fmt::Display for TraceMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.trace_count() == 0 {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .factors()
            .iter()
            .map(|&k| match k {
                1 => "(TrX)".to_string(),
                k => format!("(TrX^{k})"),
            })
            .collect();
        write!(f, "{}", parts.join(""))
    }
}

/// `Σ c_m m` with coefficients in `Q[N_l^±, N_r^±]`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TracePolynomial {
    terms: BTreeMap<TraceMonomial, BivariatePoly>,
}

impl TracePolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(m: TraceMonomial, c: BivariatePoly) -> Self {
        let mut t = Self::zero();
        t.add_term(m, c);
        t
    }

    pub fn constant(c: BivariatePoly) -> Self {
        Self::monomial(TraceMonomial::unit(), c)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TraceMonomial, &BivariatePoly)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &TraceMonomial) -> BivariatePoly {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, m: TraceMonomial, c: BivariatePoly) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m.clone()).or_default();
        *e = &*e + &c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, o: &TracePolynomial) -> TracePolynomial {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &TracePolynomial) -> TracePolynomial {
        self.add(&o.scale_poly(&BivariatePoly::constant(-Q::from_integer(1.into()))))
    }

    pub fn mul(&self, o: &TracePolynomial) -> TracePolynomial {
        let mut out = TracePolynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale_poly(&self, c: &BivariatePoly) -> TracePolynomial {
        let mut out = TracePolynomial::zero();
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    pub fn scale(&self, c: &Q) -> TracePolynomial {
        self.scale_poly(&BivariatePoly::constant(c.clone()))
    }

    /// Replaces every `Tr X⁰` by its value `N_l`.
    pub fn absorb_zeros(&self) -> TracePolynomial {
        let mut out = TracePolynomial::zero();
        for (m, c) in &self.terms {
            out.add_term(m.without_zeros(), c * &BivariatePoly::n_l_pow(m.zeros() as i32));
        }
        out
    }

    /// Specializes every coefficient to `N_l = N_r = N`.
    pub fn square(&self) -> TracePolynomial {
        let mut out = TracePolynomial::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.square());
        }
        out
    }
}

impl fmt::Display for TracePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(m, c)| format!("[{c}] {m}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::poly::q;

    #[test]
    fn canonical_form() {
        let a = TraceMonomial::new(&[3, 0, 1, 0]);
        assert_eq!(a.powers(), &[1, 3]);
        assert_eq!(a.zeros(), 2);
        assert_eq!(a, TraceMonomial::new(&[0, 1, 0, 3]));
        assert_eq!(a.to_string(), "(TrX^0)(TrX^0)(TrX)(TrX^3)");
        assert_eq!(a.without(0).unwrap().zeros(), 1);
    }

    #[test]
    fn cancellation_leaves_no_terms() {
        let x = TracePolynomial::monomial(TraceMonomial::single(2), BivariatePoly::n_l());
        assert!(x.sub(&x).is_zero());
        let y = TracePolynomial::monomial(TraceMonomial::new(&[0, 2]), BivariatePoly::constant(q(1)));
        assert_eq!(y.absorb_zeros(), x);
    }
}
