//! Derivatives of a single loop `Tr (v - M M†)^{-1}` as words of corner operators.
//!
//! Differentiating in `M` turns a resolvent `R` into `R ⊔ M† R`; in `M†` it gives
//! `R M ⊔ R`. A derivative may instead hit an `M` or `M†` numerator, which leaves an
//! empty (identity) corner between two slots.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LvrError, Result};
use crate::C64;

pub const MAX_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Corner {
    /// `R = 1/(v - X)`
    Resolvent,
    /// `R M`
    MResolvent,
    /// `M† R`
    MDaggerResolvent,
    Identity,
    /// `M† R M`, produced when an `M†` derivative hits the resolvent of `M† R`.
    MDaggerResolventM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Direction {
    M,
    MDagger,
}

/// One derivative slot: its direction and the index of the derivative among those of that kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Slot {
    pub direction: Direction,
    pub index: usize,
}

/// `Tr[O_0 ⊔ O_1 ⊔ … ⊔ O_r]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CornerWord {
    pub corners: Vec<Corner>,
    pub slots: Vec<Slot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CornerCounts {
    pub r: usize,
    /// Pure resolvents.
    pub resolvents: usize,
    /// Corners carrying a trailing `M` (`R M` and `M† R M`).
    pub m: usize,
    /// Corners carrying a leading `M†` (`M† R` and `M† R M`).
    pub m_dagger: usize,
    pub identities: usize,
    /// `M† R M` corners.
    pub sandwiched: usize,
}

impl CornerWord {
    pub fn counts(&self) -> CornerCounts {
        let c = |k: Corner| self.corners.iter().filter(|&&x| x == k).count();
        let sandwiched = c(Corner::MDaggerResolventM);
        CornerCounts {
            r: self.slots.len(),
            resolvents: c(Corner::Resolvent),
            m: c(Corner::MResolvent) + sandwiched,
            m_dagger: c(Corner::MDaggerResolvent) + sandwiched,
            identities: c(Corner::Identity),
            sandwiched,
        }
    }

    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }
}

impl CornerCounts {
    /// `r_π = 1 + i_π` as stated for four corner types.
    pub fn resolvent_identity_holds(&self) -> bool {
        self.resolvents == 1 + self.identities
    }

    /// `r_π = 1 + i_π + (number of M† R M corners)`, which also covers the fifth type.
    pub fn resolvent_identity_general_holds(&self) -> bool {
        self.resolvents == 1 + self.identities + self.sandwiched
    }

    /// `r^M_π + r^{M†}_π = r - 2 i_π`.
    pub fn numerator_identity_holds(&self) -> bool {
        self.m + self.m_dagger + 2 * self.identities == self.r
    }
}

impl fmt::Display for CornerWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |c: &Corner| match c {
            Corner::Resolvent => "R",
            Corner::MResolvent => "RM",
            Corner::MDaggerResolvent => "M†R",
            Corner::Identity => "1",
            Corner::MDaggerResolventM => "M†RM",
        };
        write!(f, "Tr[{}", name(&self.corners[0]))?;
        for (s, c) in self.slots.iter().zip(&self.corners[1..]) {
            let d = match s.direction {
                Direction::M => "M",
                Direction::MDagger => "M†",
            };
            write!(f, " ⊔{d}{} {}", s.index + 1, name(c))?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Atom {
    R,
    M,
    Md,
    Slot(Slot),
}

fn apply(word: &[Atom], slot: Slot) -> Vec<Vec<Atom>> {
    let mut out = Vec::new();
    for (pos, atom) in word.iter().enumerate() {
        let replacement: Vec<Atom> = match (atom, slot.direction) {
            (Atom::R, Direction::M) => vec![Atom::R, Atom::Slot(slot), Atom::Md, Atom::R],
            (Atom::R, Direction::MDagger) => vec![Atom::R, Atom::M, Atom::Slot(slot), Atom::R],
            (Atom::M, Direction::M) | (Atom::Md, Direction::MDagger) => vec![Atom::Slot(slot)],
            _ => continue,
        };
        let mut next = word[..pos].to_vec();
        next.extend(replacement);
        next.extend_from_slice(&word[pos + 1..]);
        out.push(next);
    }
    out
}

fn to_word(atoms: &[Atom]) -> CornerWord {
    let mut corners = Vec::new();
    let mut slots = Vec::new();
    let mut seg: Vec<Atom> = Vec::new();
    let close = |seg: &[Atom]| match seg {
        [Atom::R] => Corner::Resolvent,
        [Atom::R, Atom::M] => Corner::MResolvent,
        [Atom::Md, Atom::R] => Corner::MDaggerResolvent,
        [] => Corner::Identity,
        [Atom::Md, Atom::R, Atom::M] => Corner::MDaggerResolventM,
        other => unreachable!("corner {other:?} cannot arise"),
    };
    for a in atoms {
        match a {
            Atom::Slot(s) => {
                corners.push(close(&seg));
                slots.push(*s);
                seg.clear();
            }
            other => seg.push(*other),
        }
    }
    corners.push(close(&seg));
    CornerWord { corners, slots }
}

/// All terms of `∂^{q+q̄} / ∂M_1…∂M_q ∂M†_1…∂M†_q̄  Tr (v - X)^{-1}`, each with prefactor 1.
///
/// The `M†` derivatives act first, so `(1, 1)` lists terms in the order of
/// `∂_M ∂_{M†}`.
pub fn faadibruno_enumerate(q: usize, qbar: usize) -> Result<Vec<CornerWord>> {
    let r = q + qbar;
    if r > MAX_ORDER {
        return Err(LvrError::SizeBound { size: r, max: MAX_ORDER });
    }
    let mut words = vec![vec![Atom::R]];
    let order = (0..qbar)
        .map(|index| Slot { direction: Direction::MDagger, index })
        .chain((0..q).map(|index| Slot { direction: Direction::M, index }));
    for slot in order {
        words = words.iter().flat_map(|w| apply(w, slot)).collect();
    }
    Ok(words.iter().map(|w| to_word(w)).collect())
}

fn inverse(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    m.clone().try_inverse().ok_or(LvrError::SingularMatrix(0.0))
}

/// `Tr[O_0 D_1 O_1 … D_r O_r]` with each slot replaced by its direction matrix.
pub fn evaluate_word(
    word: &CornerWord,
    v: C64,
    m: &DMatrix<C64>,
    w: &DMatrix<C64>,
    dm: &[DMatrix<C64>],
    dw: &[DMatrix<C64>],
) -> Result<C64> {
    let n = m.nrows();
    let res = inverse(&(DMatrix::identity(n, n) * v - m * w))?;
    let corner = |c: &Corner| -> DMatrix<C64> {
        match c {
            Corner::Resolvent => res.clone(),
            Corner::MResolvent => &res * m,
            Corner::MDaggerResolvent => w * &res,
            Corner::Identity => DMatrix::identity(m.ncols().max(n), m.ncols().max(n)),
            Corner::MDaggerResolventM => w * &res * m,
        }
    };
    let mut acc = corner(&word.corners[0]);
    for (s, c) in word.slots.iter().zip(&word.corners[1..]) {
        let d = match s.direction {
            Direction::M => &dm[s.index],
            Direction::MDagger => &dw[s.index],
        };
        acc = acc * d * corner(c);
    }
    Ok(acc.trace())
}

const CIRCLE_POINTS: usize = 8;

/// Mixed partial `∂_{t_1}…∂_{t_k} g(0)` of an analytic `g` by trapezoidal sums on circles of radius `rho`.
fn circle_derivative<F: Fn(&[C64]) -> Result<C64>>(k: usize, rho: f64, g: F) -> Result<C64> {
    let total = CIRCLE_POINTS.pow(k as u32);
    let mut acc = C64::new(0.0, 0.0);
    let mut t = vec![C64::new(0.0, 0.0); k];
    for idx in 0..total {
        let mut c = idx;
        let mut phase = 0.0;
        for tj in t.iter_mut() {
            let theta = 2.0 * std::f64::consts::PI * (c % CIRCLE_POINTS) as f64 / CIRCLE_POINTS as f64;
            c /= CIRCLE_POINTS;
            *tj = C64::from_polar(rho, theta);
            phase += theta;
        }
        acc += g(&t)? * C64::from_polar(1.0, -phase);
    }
    Ok(acc / (total as f64 * rho.powi(k as i32)))
}

#[derive(Debug, Clone, Serialize)]
pub struct FaaNumericReport {
    pub q: usize,
    pub qbar: usize,
    pub words: usize,
    pub from_words: C64,
    pub differenced: C64,
    pub rel_error: f64,
}

/// Compares the summed corner words with a differenced `Tr (v - (M + Σ t D)(M† + Σ s E))^{-1}`.
///
/// Slot directions are unit matrices `E_ab` drawn from `seed`.
pub fn faadibruno_numeric_check(v: C64, m: &DMatrix<C64>, q: usize, qbar: usize, seed: u64) -> Result<FaaNumericReport> {
    if !m.is_square() {
        return Err(LvrError::InvalidParameter("square M required".into()));
    }
    let n = m.nrows();
    let w = m.adjoint();
    let x = m * &w;
    let (vals, _) = crate::lvr_action::hermitian_eigen(&x);
    let gap = vals.iter().map(|&s| (v - s).norm()).fold(f64::INFINITY, f64::min);
    if gap < 1e-6 {
        return Err(LvrError::InvalidParameter(format!("v = {v} lies on the spectrum of X")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || {
        let mut e = DMatrix::zeros(n, n);
        e[(rng.random_range(0..n), rng.random_range(0..n))] = C64::new(1.0, 0.0);
        e
    };
    let dm: Vec<DMatrix<C64>> = (0..q).map(|_| unit()).collect();
    let dw: Vec<DMatrix<C64>> = (0..qbar).map(|_| unit()).collect();
    let words = faadibruno_enumerate(q, qbar)?;
    let mut from_words = C64::new(0.0, 0.0);
    for word in &words {
        from_words += evaluate_word(word, v, m, &w, &dm, &dw)?;
    }
    let scale = m.norm().max(1.0);
    let rho = 0.05 * gap.min(1.0) / scale;
    let differenced = circle_derivative(q + qbar, rho, |t| {
        let mut mm = m.clone();
        let mut ww = w.clone();
        for (k, d) in dm.iter().enumerate() {
            mm += d * t[k];
        }
        for (k, e) in dw.iter().enumerate() {
            ww += e * t[q + k];
        }
        Ok(inverse(&(DMatrix::identity(n, n) * v - &mm * &ww))?.trace())
    })?;
    let rel_error = (from_words - differenced).norm() / differenced.norm().max(1e-300);
    Ok(FaaNumericReport { q, qbar, words: words.len(), from_words, differenced, rel_error })
}
