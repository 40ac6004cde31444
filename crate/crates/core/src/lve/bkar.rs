//! The BKAR forest formula: interpolation matrices and an exact-rational check.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::forest::{enumerate_forests, pair_index, pairs, Forest};
use crate::error::{LvrError, Result};
use crate::perturbation::poly::{q, Q};

pub const MAX_IDENTITY_VERTICES: usize = 4;

/// `x_ij = min_{l ∈ P_{i↔j}} w_l`, `0` across components, `1` on the diagonal.
pub fn bkar_interpolate(forest: &Forest, w: &[f64]) -> Result<DMatrix<f64>> {
    if w.len() != forest.edges.len() {
        return Err(LvrError::InvalidParameter(format!(
            "{} weights for {} edges",
            w.len(),
            forest.edges.len()
        )));
    }
    if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(LvrError::InvalidParameter("weights must lie in [0, 1]".into()));
    }
    let n = forest.n;
    let mut x = DMatrix::identity(n, n);
    for (i, j) in pairs(n) {
        if let Some(path) = forest.path(i, j) {
            let v = path.iter().map(|&e| w[e]).fold(1.0, f64::min);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub draws: usize,
    pub min_eigenvalue: f64,
}

/// Smallest eigenvalue of `x^F(w)` over random forests (`n ≤ 6`) and uniform weights.
pub fn bkar_psd_check(draws: usize, seed: u64) -> Result<PsdReport> {
    let forests: Vec<Vec<Forest>> = (1..=6).map(enumerate_forests).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_eig = f64::INFINITY;
    for _ in 0..draws {
        let list = &forests[rng.random_range(0..forests.len())];
        let f = &list[rng.random_range(0..list.len())];
        let w: Vec<f64> = (0..f.edges.len()).map(|_| rng.random::<f64>()).collect();
        let x = bkar_interpolate(f, &w)?;
        let e = SymmetricEigen::new(x).eigenvalues.min();
        min_eig = min_eig.min(e);
    }
    Ok(PsdReport { draws, min_eigenvalue: min_eig })
}

/// Polynomial in the off-diagonal entries `x_ij`, keyed by per-pair exponents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairPoly {
    pub n: usize,
    pub terms: BTreeMap<Vec<u32>, Q>,
}

impl PairPoly {
    pub fn zero(n: usize) -> Self {
        PairPoly { n, terms: BTreeMap::new() }
    }

    pub fn n_pairs(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// `c · Π x_{ij}` over the listed pairs (repeats raise the power).
    pub fn monomial(n: usize, factors: &[(usize, usize)], c: Q) -> Self {
        let mut p = Self::zero(n);
        let mut e = vec![0; p.n_pairs()];
        for &(i, j) in factors {
            e[pair_index(n, i, j)] += 1;
        }
        if !c.is_zero() {
            p.terms.insert(e, c);
        }
        p
    }

    pub fn add(mut self, o: &PairPoly) -> Self {
        for (k, v) in &o.terms {
            let e = self.terms.entry(k.clone()).or_insert_with(Q::zero);
            *e += v;
            if e.is_zero() {
                self.terms.remove(k);
            }
        }
        self
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    fn derivative(&self, pair: usize) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            if e[pair] > 0 {
                let mut f = e.clone();
                f[pair] -= 1;
                *out.terms.entry(f).or_insert_with(Q::zero) += c * q(e[pair] as i64);
            }
        }
        out.terms.retain(|_, v| !v.is_zero());
        out
    }

    /// Value with every `x_ij = 1`.
    pub fn at_ones(&self) -> Q {
        self.terms.values().cloned().sum()
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// `∫_{[0,1]^F} dw ∂_F f |_{x = x^F(w)}`, exactly.
pub fn forest_term(f: &PairPoly, forest: &Forest) -> Q {
    let n = forest.n;
    let mut g = f.clone();
    for &(a, b) in &forest.edges {
        g = g.derivative(pair_index(n, a, b));
    }
    let paths: Vec<Option<Vec<usize>>> = pairs(n).iter().map(|&(i, j)| forest.path(i, j)).collect();
    let m = forest.edges.len();
    let orders = permutations(m);
    let mut total = Q::zero();
    for (e, c) in &g.terms {
        if e.iter().zip(&paths).any(|(&k, p)| k > 0 && p.is_none()) {
            continue;
        }
        // On the simplex w_{σ0} < w_{σ1} < …, each path minimum is its earliest edge in σ.
        for sigma in &orders {
            let mut rank = vec![0; m];
            for (r, &edge) in sigma.iter().enumerate() {
                rank[edge] = r;
            }
            let mut exps = vec![0u32; m];
            for (k, p) in e.iter().zip(&paths) {
                if *k > 0 {
                    let p = p.as_ref().expect("checked above");
                    let first = *p.iter().min_by_key(|&&edge| rank[edge]).expect("distinct vertices");
                    exps[rank[first]] += k;
                }
            }
            let mut vol = Q::one();
            let mut cum = 0u32;
            for (r, &x) in exps.iter().enumerate() {
                cum += x;
                vol /= q((cum + r as u32 + 1) as i64);
            }
            total += c * vol;
        }
    }
    total
}

/// `Σ_F ∫ dw_F ∂_F f(x^F(w)) − f(1)`; zero exactly when the forest formula holds.
pub fn bkar_identity_check(f: &PairPoly) -> Result<Q> {
    if f.n == 0 || f.n > MAX_IDENTITY_VERTICES {
        return Err(LvrError::SizeBound { size: f.n, max: MAX_IDENTITY_VERTICES });
    }
    let sum: Q = enumerate_forests(f.n)?.iter().map(|forest| forest_term(f, forest)).sum();
    Ok(sum - f.at_ones())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::poly::q_ratio;

    #[test]
    fn interpolation_examples() {
        let path = Forest::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let x = bkar_interpolate(&path, &[0.7, 0.4]).unwrap();
        assert_eq!(x[(0, 2)], 0.4);
        assert_eq!(x[(0, 1)], 0.7);
        assert_eq!(bkar_interpolate(&Forest::empty(2), &[]).unwrap()[(0, 1)], 0.0);
        let ones = bkar_interpolate(&path, &[1.0, 1.0]).unwrap();
        assert!(ones.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn two_vertex_square() {
        let f = PairPoly::monomial(2, &[(0, 1), (0, 1)], q(1));
        let forests = enumerate_forests(2).unwrap();
        assert_eq!(forest_term(&f, &forests[0]), q(0));
        assert_eq!(forest_term(&f, &forests[1]), q(1));
        assert_eq!(bkar_identity_check(&f).unwrap(), q(0));
    }

    #[test]
    fn path_product_and_constant() {
        let f = PairPoly::monomial(3, &[(0, 1), (1, 2)], q_ratio(3, 7));
        assert_eq!(bkar_identity_check(&f).unwrap(), q(0));
        let c = PairPoly::monomial(3, &[], q(5));
        let forests = enumerate_forests(3).unwrap();
        assert_eq!(forest_term(&c, &forests[0]), q(5));
        assert!(forests[1..].iter().all(|fr| forest_term(&c, fr).is_zero()));
    }
}
