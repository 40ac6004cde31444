//! Laurent polynomials in `N_l`, `N_r` with exact rational coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_ratio(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// `Σ c_{ij} N_l^i N_r^j`; no zero coefficient is ever stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct BivariatePoly {
    terms: BTreeMap<(i32, i32), Q>,
}

impl BivariatePoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Q) -> Self {
        Self::term(0, 0, c)
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn term(nl: i32, nr: i32, c: Q) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((nl, nr), c);
        }
        BivariatePoly { terms }
    }

    pub fn n_l() -> Self {
        Self::term(1, 0, Q::one())
    }

    pub fn n_r() -> Self {
        Self::term(0, 1, Q::one())
    }

    pub fn n_l_pow(k: i32) -> Self {
        Self::term(k, 0, Q::one())
    }

    pub fn n_r_pow(k: i32) -> Self {
        Self::term(0, k, Q::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(i32, i32), &Q)> {
        self.terms.iter()
    }

    pub fn coeff(&self, nl: i32, nr: i32) -> Q {
        self.terms.get(&(nl, nr)).cloned().unwrap_or_else(Q::zero)
    }

    fn add_term(&mut self, key: (i32, i32), c: Q) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(key).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        BivariatePoly { terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect() }
    }

    /// Sets `N_l = N_r = N`; the result is stored in the `N_l` slot.
    pub fn square(&self) -> Self {
        let mut out = Self::zero();
        for (&(i, j), c) in &self.terms {
            out.add_term((i + j, 0), c.clone());
        }
        out
    }

    pub fn eval(&self, nl: &Q, nr: &Q) -> Q {
        let pow = |x: &Q, k: i32| -> Q {
            if k >= 0 {
                num_traits::pow(x.clone(), k as usize)
            } else {
                num_traits::pow(x.recip(), (-k) as usize)
            }
        };
        self.terms.iter().map(|(&(i, j), c)| c * pow(nl, i) * pow(nr, j)).sum()
    }

    pub fn eval_f64(&self, nl: f64, nr: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| c.to_f64().unwrap_or(f64::NAN) * nl.powi(i) * nr.powi(j))
            .sum()
    }
}

impl fmt::Display for BivariatePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // Highest total degree first.
        let mut keys: Vec<_> = self.terms.keys().copied().collect();
        keys.sort_by_key(|&(i, j)| (std::cmp::Reverse(i + j), std::cmp::Reverse(i)));
        for (n, key) in keys.iter().enumerate() {
            let c = &self.terms[key];
            let neg = c.is_negative();
            if n == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            let mag = c.abs();
            let factors: Vec<String> = [("N_l", key.0), ("N_r", key.1)]
                .iter()
                .filter(|(_, e)| *e != 0)
                .map(|(s, e)| if *e == 1 { s.to_string() } else { format!("{s}^{e}") })
                .collect();
            if factors.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{}", factors.join(" "))?;
            } else {
                write!(f, "{mag} {}", factors.join(" "))?;
            }
        }
        Ok(())
    }
}

impl Serialize for BivariatePoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl Add for &BivariatePoly {
    type Output = BivariatePoly;
    fn add(self, o: &BivariatePoly) -> BivariatePoly {
        let mut out = self.clone();
        for (k, v) in &o.terms {
            out.add_term(*k, v.clone());
        }
        out
    }
}

impl Sub for &BivariatePoly {
    type Output = BivariatePoly;
    fn sub(self, o: &BivariatePoly) -> BivariatePoly {
        let mut out = self.clone();
        for (k, v) in &o.terms {
            out.add_term(*k, -v.clone());
        }
        out
    }
}

impl Mul for &BivariatePoly {
    type Output = BivariatePoly;
    fn mul(self, o: &BivariatePoly) -> BivariatePoly {
        let mut out = BivariatePoly::zero();
        for (&(i1, j1), a) in &self.terms {
            for (&(i2, j2), b) in &o.terms {
                out.add_term((i1 + i2, j1 + j2), a * b);
            }
        }
        out
    }
}

impl Neg for &BivariatePoly {
    type Output = BivariatePoly;
    fn neg(self) -> BivariatePoly {
        self.scale(&-Q::one())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for BivariatePoly {
            type Output = BivariatePoly;
            fn $m(self, o: BivariatePoly) -> BivariatePoly {
                (&self).$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
