//! The map `A(λ, X)` and the loop vertex action `S` in spectral form.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{LvrError, Result};
use crate::fuss_catalan::FcEvaluator;
use crate::C64;

/// Coupling domain `{0 < |λ| < η, |arg λ| < π - ε}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pacman {
    pub epsilon: f64,
    pub eta: f64,
}

impl Pacman {
    pub fn new(epsilon: f64, eta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < std::f64::consts::PI) || !(eta > 0.0) {
            return Err(LvrError::InvalidParameter(format!(
                "pacman needs 0 < epsilon < pi and eta > 0 (got {epsilon}, {eta})"
            )));
        }
        Ok(Pacman { epsilon, eta })
    }

    pub fn contains(&self, lambda: C64) -> bool {
        let m = lambda.norm();
        m > 0.0 && m < self.eta && lambda.arg().abs() < std::f64::consts::PI - self.epsilon
    }
}

impl Default for Pacman {
    fn default() -> Self {
        Pacman { epsilon: 0.5, eta: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub p: u32,
    pub lambda: C64,
    pub n_l: usize,
    pub n_r: usize,
    pub pacman: Pacman,
}

impl ModelParams {
    pub fn new(p: u32, lambda: C64, n_l: usize, n_r: usize) -> Result<Self> {
        if p < 2 {
            return Err(LvrError::InvalidParameter(format!("p = {p} must be at least 2")));
        }
        if n_l == 0 || n_l > n_r {
            return Err(LvrError::InvalidParameter(format!(
                "need 1 <= N_l <= N_r (got N_l = {n_l}, N_r = {n_r})"
            )));
        }
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(LvrError::InvalidParameter("lambda must be finite".into()));
        }
        Ok(ModelParams {
            p,
            lambda,
            n_l,
            n_r,
            pacman: Pacman::default(),
        })
    }

    pub fn square(p: u32, lambda: C64, n: usize) -> Result<Self> {
        Self::new(p, lambda, n, n)
    }

    pub fn with_pacman(mut self, pacman: Pacman) -> Self {
        self.pacman = pacman;
        self
    }

    pub fn with_lambda(mut self, lambda: C64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn is_in_pacman(&self) -> bool {
        self.pacman.contains(self.lambda)
    }

    pub fn is_square(&self) -> bool {
        self.n_l == self.n_r
    }
}

/// Eigenvalues of `X = M M†`, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(LvrError::InvalidParameter(format!("eigenvalue {bad} is not a finite nonnegative real")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Spectrum { values })
    }

    /// Spectrum of `M M†`; tiny negative rounding is clamped to zero.
    pub fn of_matrix(m: &DMatrix<C64>) -> Self {
        let (vals, _) = hermitian_eigen(&(m * m.adjoint()));
        Spectrum { values: vals.into_iter().map(|v| v.max(0.0)).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Eigenvalues (ascending) and matching eigenvector columns of a Hermitian matrix.
pub fn hermitian_eigen(h: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopVertexAction {
    pub s_mat: C64,
    pub s_vec: C64,
    pub total: C64,
}

const DEFAULT_GUARD_SAMPLES: usize = 16;

/// A model instance: parameters plus a `T_p` evaluator reused across calls.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    fc: FcEvaluator,
    /// Points sampled along `t ↦ tλ` by the logarithm winding guard.
    pub guard_samples: usize,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        Ok(Model {
            fc: FcEvaluator::new(params.p)?,
            params,
            guard_samples: DEFAULT_GUARD_SAMPLES,
        })
    }

    pub fn fc(&self) -> &FcEvaluator {
        &self.fc
    }

    pub fn p(&self) -> u32 {
        self.params.p
    }

    pub fn lambda(&self) -> C64 {
        self.params.lambda
    }

    /// Same model at another coupling.
    pub fn at_lambda(&self, lambda: C64) -> Self {
        Model {
            params: self.params.with_lambda(lambda),
            fc: self.fc.clone(),
            guard_samples: self.guard_samples,
        }
    }

    fn check_len(&self, spec: &Spectrum) -> Result<()> {
        if spec.len() != self.params.n_l {
            return Err(LvrError::InvalidParameter(format!(
                "spectrum has {} values, expected N_l = {}",
                spec.len(),
                self.params.n_l
            )));
        }
        Ok(())
    }

    /// `a(λ, s_i)` for each eigenvalue.
    pub fn matrix_a(&self, spec: &Spectrum) -> Result<Vec<C64>> {
        self.a_values(self.params.lambda, spec.values())
    }

    fn a_values(&self, lambda: C64, s: &[f64]) -> Result<Vec<C64>> {
        s.iter()
            .enumerate()
            .map(|(i, &x)| {
                self.fc
                    .a_eval(lambda, C64::new(x, 0.0))
                    .map_err(|e| e.at_eigenvalue(i))
            })
            .collect()
    }

    /// `Σ_{k=0}^{p-1} a_i^k a_j^{p-1-k}`.
    pub fn sigma(&self, ai: C64, aj: C64) -> C64 {
        let p = self.params.p as i32;
        (0..p).map(|k| ai.powi(k) * aj.powi(p - 1 - k)).sum()
    }

    /// Log arguments `1 + λΣ(a_i, a_j)` (row-major) and `1 + λ a_i^{p-1}`.
    pub(crate) fn log_args(&self, lambda: C64, a: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let p = self.params.p as i32;
        let mut mat = Vec::with_capacity(a.len() * a.len());
        for &ai in a {
            for &aj in a {
                mat.push(1.0 + lambda * self.sigma(ai, aj));
            }
        }
        let vec = a.iter().map(|&ai| 1.0 + lambda * ai.powi(p - 1)).collect();
        (mat, vec)
    }

    /// The loop vertex action `S = S_mat + S_vec` on a spectrum.
    pub fn action_s(&self, spec: &Spectrum) -> Result<LoopVertexAction> {
        self.check_len(spec)?;
        let lambda = self.params.lambda;
        let a = self.matrix_a(spec)?;
        let (mat, vec) = self.log_args(lambda, &a);
        if !(lambda.im == 0.0 && lambda.re >= 0.0) {
            self.winding_guard(spec.values(), &mat, &vec)?;
        }
        let s_mat = -mat.iter().map(|w| w.ln()).sum::<C64>();
        let extra = (self.params.n_r - self.params.n_l) as f64;
        let s_vec = if extra == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            -extra * vec.iter().map(|w| w.ln()).sum::<C64>()
        };
        Ok(LoopVertexAction { s_mat, s_vec, total: s_mat + s_vec })
    }

    /// Tracks the phase of every log argument along `t ↦ tλ` from `t = 0`.
    ///
    /// The principal logarithm equals the continued one as long as the accumulated
    /// phase stays inside `(-π, π)`.
    fn winding_guard(&self, values: &[f64], mat: &[C64], vec: &[C64]) -> Result<()> {
        let n = values.len();
        let k = self.guard_samples.max(1);
        let mut prev_mat = vec![C64::new(1.0, 0.0); mat.len()];
        let mut prev_vec = vec![C64::new(1.0, 0.0); vec.len()];
        let mut phase_mat = vec![0.0; mat.len()];
        let mut phase_vec = vec![0.0; vec.len()];
        for step in 1..=k {
            let (cur_mat, cur_vec) = if step == k {
                (mat.to_vec(), vec.to_vec())
            } else {
                let lam = self.params.lambda * (step as f64 / k as f64);
                let a = self.a_values(lam, values)?;
                self.log_args(lam, &a)
            };
            for (idx, w) in cur_mat.iter().enumerate() {
                if accumulate_phase(&mut phase_mat[idx], prev_mat[idx], *w) {
                    return Err(LvrError::LogBranchAmbiguity {
                        i: idx / n,
                        j: idx % n,
                        winding: phase_mat[idx],
                    });
                }
            }
            if self.params.n_r > self.params.n_l {
                for (i, w) in cur_vec.iter().enumerate() {
                    if accumulate_phase(&mut phase_vec[i], prev_vec[i], *w) {
                        // Vector-piece arguments are reported with j = N_l.
                        return Err(LvrError::LogBranchAmbiguity { i, j: n, winding: phase_vec[i] });
                    }
                }
            }
            prev_mat = cur_mat;
            prev_vec = cur_vec;
        }
        Ok(())
    }

    /// Runs the logarithm winding guard on every pair drawn from `values`.
    ///
    /// A clean pass means the principal logarithm is the continued one for any
    /// spectrum built from these values.
    pub fn check_branch(&self, values: &[f64]) -> Result<Vec<C64>> {
        let lambda = self.params.lambda;
        let a = self.a_values(lambda, values)?;
        if !(lambda.im == 0.0 && lambda.re >= 0.0) {
            let (mat, vec) = self.log_args(lambda, &a);
            self.winding_guard(values, &mat, &vec)?;
        }
        Ok(a)
    }

    /// `dS/dλ` from the λ-derivative of `a`.
    pub fn action_dlambda(&self, spec: &Spectrum) -> Result<C64> {
        self.check_len(spec)?;
        let p = self.params.p as i32;
        let lambda = self.params.lambda;
        let ad: Vec<(C64, C64)> = spec
            .values()
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                self.fc
                    .a_with_dt(lambda, C64::new(s, 0.0))
                    .map_err(|e| e.at_eigenvalue(i))
            })
            .collect::<Result<_>>()?;
        let mut total = C64::new(0.0, 0.0);
        for &(ai, di) in &ad {
            for &(aj, dj) in &ad {
                let sig = self.sigma(ai, aj);
                let dsig: C64 = (0..p)
                    .map(|k| {
                        let m = p - 1 - k;
                        let mut t = C64::new(0.0, 0.0);
                        if k > 0 {
                            t += di * ai.powi(k - 1) * aj.powi(m) * k as f64;
                        }
                        if m > 0 {
                            t += dj * ai.powi(k) * aj.powi(m - 1) * m as f64;
                        }
                        t
                    })
                    .sum();
                total -= (sig + lambda * dsig) / (1.0 + lambda * sig);
            }
        }
        let extra = (self.params.n_r - self.params.n_l) as f64;
        if extra > 0.0 {
            for &(ai, di) in &ad {
                let ap = ai.powi(p - 1);
                let dap = if p > 1 { di * ai.powi(p - 2) * (p - 1) as f64 } else { C64::new(0.0, 0.0) };
                total -= extra * (ap + lambda * dap) / (1.0 + lambda * ap);
            }
        }
        Ok(total)
    }

    /// `∂S/∂s_i` for the spectral form of the action.
    pub fn action_spectral_gradient(&self, spec: &Spectrum) -> Result<Vec<C64>> {
        self.check_len(spec)?;
        let p = self.params.p as i32;
        let lambda = self.params.lambda;
        let mut a = Vec::with_capacity(spec.len());
        let mut da = Vec::with_capacity(spec.len());
        for (i, &s) in spec.values().iter().enumerate() {
            let u = C64::new(s, 0.0);
            a.push(self.fc.a_eval(lambda, u).map_err(|e| e.at_eigenvalue(i))?);
            da.push(self.fc.a_du(lambda, u).map_err(|e| e.at_eigenvalue(i))?);
        }
        let extra = (self.params.n_r - self.params.n_l) as f64;
        let grad = (0..a.len())
            .map(|i| {
                let mut g = C64::new(0.0, 0.0);
                for j in 0..a.len() {
                    let d1: C64 = (1..p)
                        .map(|k| a[i].powi(k - 1) * a[j].powi(p - 1 - k) * k as f64)
                        .sum::<C64>()
                        * da[i];
                    g -= 2.0 * lambda * d1 / (1.0 + lambda * self.sigma(a[i], a[j]));
                }
                if extra > 0.0 {
                    let num = lambda * (p - 1) as f64 * a[i].powi(p - 2) * da[i];
                    g -= extra * num / (1.0 + lambda * a[i].powi(p - 1));
                }
                g
            })
            .collect();
        Ok(grad)
    }

    /// `(∂S/∂M_{ab}, ∂S/∂M̄_{ab})` with `M` and `M̄` treated as independent.
    ///
    /// Returns `(M† G)ᵀ` and `G M`, where `G = U diag(∂S/∂s) U†` is the gradient in `X`.
    pub fn action_matrix_gradient(&self, m: &DMatrix<C64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
        let x = m * m.adjoint();
        let (vals, u) = hermitian_eigen(&x);
        let spec = Spectrum::new(vals.into_iter().map(|v| v.max(0.0)).collect())?;
        let g_s = self.action_spectral_gradient(&spec)?;
        let g = &u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(g_s)) * u.adjoint();
        let d_m = (m.adjoint() * &g).transpose();
        let d_mbar = &g * m;
        Ok((d_m, d_mbar))
    }

    /// Max entrywise gap between the divided-difference matrix of `a` and
    /// `1/(1 + λ Σ_k a_i^k a_j^{p-1-k})`.
    pub fn resolvent_derivative_check(&self, spec: &Spectrum) -> Result<f64> {
        self.check_len(spec)?;
        let s = spec.values();
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                let gap = (s[i] - s[j]).abs();
                if gap < 1e-10 {
                    return Err(LvrError::DegenerateSpectrum { i, j, gap });
                }
            }
        }
        let lambda = self.params.lambda;
        let a = self.matrix_a(spec)?;
        let mut worst = 0.0f64;
        for i in 0..s.len() {
            for j in 0..s.len() {
                let dd = if i == j {
                    self.fc
                        .a_du(lambda, C64::new(s[i], 0.0))
                        .map_err(|e| e.at_eigenvalue(i))?
                } else {
                    (a[i] - a[j]) / (s[i] - s[j])
                };
                let inv = 1.0 / (1.0 + lambda * self.sigma(a[i], a[j]));
                worst = worst.max((dd - inv).norm());
            }
        }
        Ok(worst)
    }

    /// Residual of the selective-integration fixed point for a dense sample `M`.
    ///
    /// Builds `C₀ = A(X)(M†)⁺ - M` with the left inverse `(M†)⁺ = X⁻¹M`, and returns
    /// `‖C₀ + λ((M + C₀)M†)^{p-1}(M + C₀)‖_max` together with the tolerance
    /// `1e-8 (1 + ‖M‖^{3p})`.
    pub fn selective_integration_check(&self, m: &DMatrix<C64>) -> Result<(f64, f64)> {
        let (nl, nr) = (self.params.n_l, self.params.n_r);
        if m.nrows() != nl || m.ncols() != nr {
            return Err(LvrError::InvalidParameter(format!(
                "M is {}x{}, expected {nl}x{nr}",
                m.nrows(),
                m.ncols()
            )));
        }
        let x = m * m.adjoint();
        let (vals, u) = hermitian_eigen(&x);
        let top = vals.last().copied().unwrap_or(0.0);
        if vals[0] <= 1e-12 * top.max(1.0) {
            return Err(LvrError::SingularMatrix(vals[0]));
        }
        let lambda = self.params.lambda;
        let p = self.params.p as i32;
        let a: Vec<C64> = vals
            .iter()
            .enumerate()
            .map(|(i, &s)| self.fc.a_eval(lambda, C64::new(s, 0.0)).map_err(|e| e.at_eigenvalue(i)))
            .collect::<Result<_>>()?;
        let big_a = &u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(a)) * u.adjoint();
        let x_inv = &u
            * DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                nl,
                vals.iter().map(|&s| C64::new(1.0 / s, 0.0)),
            ))
            * u.adjoint();
        let c0 = &big_a * x_inv * m - m;
        let y = m + &c0;
        let ym = &y * m.adjoint();
        let mut pow = DMatrix::<C64>::identity(nl, nl);
        for _ in 0..(p - 1) {
            pow = &pow * &ym;
        }
        let res = &c0 + (pow * &y) * lambda;
        let resid = res.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let norm_m = top.sqrt();
        let tol = 1e-8 * (1.0 + norm_m.powi(3 * p));
        Ok((resid, tol))
    }
}

/// Adds the phase increment from `prev` to `cur`; true once the total leaves `(-π, π)`.
fn accumulate_phase(phase: &mut f64, prev: C64, cur: C64) -> bool {
    *phase += (cur / prev).arg();
    phase.abs() >= std::f64::consts::PI
}

impl Model {
    /// The factors `1 + λ Σ_k a_i^k a_j^{p-1-k}` whose product is the Jacobian.
    pub fn jacobian_factors(&self, spec: &Spectrum) -> Result<Vec<C64>> {
        let a = self.matrix_a(spec)?;
        Ok(self.log_args(self.params.lambda, &a).0)
    }
}

/// `|Tr(MM†)^q - Tr(M†M)^q|`.
pub fn trace_identity_residual(m: &DMatrix<C64>, q: u32) -> f64 {
    let x = m * m.adjoint();
    let y = m.adjoint() * m;
    let mut px = DMatrix::identity(x.nrows(), x.nrows());
    let mut py = DMatrix::identity(y.nrows(), y.nrows());
    for _ in 0..q {
        px = &px * &x;
        py = &py * &y;
    }
    if q == 0 {
        // Trace of the identity differs by N_r - N_l; compare only q ≥ 1.
        return 0.0;
    }
    (px.trace() - py.trace()).norm()
}

pub fn matrix_a(spec: &Spectrum, params: &ModelParams) -> Result<Vec<C64>> {
    Model::new(*params)?.matrix_a(spec)
}

pub fn action_s(spec: &Spectrum, params: &ModelParams) -> Result<LoopVertexAction> {
    Model::new(*params)?.action_s(spec)
}

pub fn resolvent_derivative_check(spec: &Spectrum, params: &ModelParams) -> Result<f64> {
    Model::new(*params)?.resolvent_derivative_check(spec)
}

pub fn selective_integration_check(m: &DMatrix<C64>, params: &ModelParams) -> Result<(f64, f64)> {
    Model::new(*params)?.selective_integration_check(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn gaussian(nl: usize, nr: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = (0.5 / nr as f64).sqrt();
        DMatrix::from_fn(nl, nr, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c(re * sd, im * sd)
        })
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(2, c(0.1, 0.0), 3, 2).is_err());
        assert!(ModelParams::new(1, c(0.1, 0.0), 1, 1).is_err());
        let p = ModelParams::square(2, c(0.1, 0.0), 2).unwrap();
        assert!(p.is_in_pacman());
        assert!(!p.with_lambda(c(0.0, 0.0)).is_in_pacman());
        assert!(!p.with_lambda(C64::from_polar(0.1, 3.0)).is_in_pacman());
        assert!(Spectrum::new(vec![1.0, -0.1]).is_err());
        assert_eq!(Spectrum::new(vec![2.0, 1.0]).unwrap().values(), &[1.0, 2.0]);
    }

    #[test]
    fn matrix_a_examples() {
        let spec = Spectrum::new(vec![0.3, 2.0]).unwrap();
        let p0 = ModelParams::square(3, c(0.0, 0.0), 2).unwrap();
        let a = matrix_a(&spec, &p0).unwrap();
        assert_eq!(a, vec![c(0.3, 0.0), c(2.0, 0.0)]);

        let p = ModelParams::square(2, c(0.1, 0.0), 1).unwrap();
        let a = matrix_a(&Spectrum::new(vec![1.0]).unwrap(), &p).unwrap();
        assert!((a[0].re - 0.916_079_783_099_616).abs() < 1e-12);

        let p = ModelParams::square(3, c(0.05, 0.0), 2).unwrap();
        let a = matrix_a(&Spectrum::new(vec![0.0, 2.0]).unwrap(), &p).unwrap();
        assert_eq!(a[0], c(0.0, 0.0));
        assert!((a[1] + 0.05 * a[1].powi(3) - 2.0).norm() < 1e-12);
    }

    #[test]
    fn action_scalar_reduction() {
        let p = ModelParams::square(2, c(0.1, 0.0), 1).unwrap();
        let spec = Spectrum::new(vec![1.0]).unwrap();
        let a = matrix_a(&spec, &p).unwrap()[0];
        let s = action_s(&spec, &p).unwrap();
        assert!((s.total - -(1.0 + 0.2 * a).ln()).norm() < 1e-14);
        assert_eq!(s.s_vec, c(0.0, 0.0));
        let zero = action_s(&spec, &p.with_lambda(c(0.0, 0.0))).unwrap();
        assert_eq!(zero.total, c(0.0, 0.0));
    }

    #[test]
    fn action_real_for_positive_coupling() {
        let p = ModelParams::new(3, c(0.3, 0.0), 3, 5).unwrap();
        let spec = Spectrum::new(vec![0.1, 1.7, 4.2]).unwrap();
        let model = Model::new(p).unwrap();
        let s = model.action_s(&spec).unwrap();
        assert!(s.total.im.abs() < 1e-14);
        assert!(s.s_vec.norm() > 0.0);
        assert!(model.jacobian_factors(&spec).unwrap().iter().all(|w| w.re > 1.0 && w.im.abs() < 1e-14));
    }

    #[test]
    fn action_derivative_matches_difference() {
        let spec = Spectrum::new(vec![0.4, 1.1, 2.3]).unwrap();
        for (nl, nr) in [(3, 3), (3, 4)] {
            let lam = C64::from_polar(0.07, 0.6);
            let model = Model::new(ModelParams::new(3, lam, nl, nr).unwrap()).unwrap();
            let h = 1e-5;
            let fd = (model.at_lambda(lam + h).action_s(&spec).unwrap().total
                - model.at_lambda(lam - h).action_s(&spec).unwrap().total)
                / (2.0 * h);
            let d = model.action_dlambda(&spec).unwrap();
            assert!((fd - d).norm() / d.norm() < 1e-5, "{fd} vs {d}");
        }
    }

    #[test]
    fn phase_tracker_detects_full_turn() {
        let mut phase = 0.0;
        let mut prev = c(1.0, 0.0);
        let mut tripped = false;
        for k in 1..=32 {
            let cur = C64::from_polar(1.0, 4.0 * k as f64 / 32.0);
            tripped |= accumulate_phase(&mut phase, prev, cur);
            prev = cur;
        }
        assert!(tripped && (phase - 4.0).abs() < 1e-12);
    }

    #[test]
    fn guard_is_clean_on_rotated_couplings() {
        let spec = Spectrum::new(vec![0.2, 3.0, 40.0]).unwrap();
        for p in 2..=4 {
            for th in [-2.5, -1.0, 1.5, 2.6] {
                let model = Model::new(ModelParams::square(p, C64::from_polar(0.3, th), 3).unwrap()).unwrap();
                model.action_s(&spec).unwrap();
            }
        }
    }

    #[test]
    fn resolvent_derivative_examples() {
        let spec = Spectrum::new(vec![0.5, 1.5]).unwrap();
        let p = ModelParams::square(3, c(0.05, 0.0), 2).unwrap();
        assert!(resolvent_derivative_check(&spec, &p).unwrap() <= 1e-8);
        assert_eq!(resolvent_derivative_check(&spec, &p.with_lambda(c(0.0, 0.0))).unwrap(), 0.0);
        let p = ModelParams::square(2, c(0.1, 0.0), 2).unwrap();
        let spec = Spectrum::new(vec![1.0, 2.0]).unwrap();
        assert!(resolvent_derivative_check(&spec, &p).unwrap() <= 1e-8);
        let deg = Spectrum::new(vec![1.0, 1.0 + 1e-12]).unwrap();
        assert!(matches!(
            resolvent_derivative_check(&deg, &p),
            Err(LvrError::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn selective_integration_examples() {
        let m = gaussian(2, 2, 7);
        let p = ModelParams::square(2, c(0.0, 0.0), 2).unwrap();
        let (r, _) = selective_integration_check(&m, &p).unwrap();
        assert!(r < 1e-14);
        let (r, tol) = selective_integration_check(&m, &p.with_lambda(c(0.1, 0.0))).unwrap();
        assert!(r <= tol, "{r} > {tol}");
        let m = gaussian(2, 3, 8);
        let p = ModelParams::new(3, c(0.05, 0.0), 2, 3).unwrap();
        let (r, tol) = selective_integration_check(&m, &p).unwrap();
        assert!(r <= tol, "{r} > {tol}");
        let singular = DMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(matches!(
            selective_integration_check(&singular, &p.with_lambda(c(0.1, 0.0))),
            Err(LvrError::InvalidParameter(_))
        ));
        let p2 = ModelParams::square(2, c(0.1, 0.0), 2).unwrap();
        assert!(matches!(
            selective_integration_check(&singular, &p2),
            Err(LvrError::SingularMatrix(_))
        ));
    }

    #[test]
    fn matrix_gradient_matches_difference() {
        let m = gaussian(2, 2, 11);
        let model = Model::new(ModelParams::square(2, C64::from_polar(0.1, 0.4), 2).unwrap()).unwrap();
        let (dm, dmbar) = model.action_matrix_gradient(&m).unwrap();
        let h = 1e-6;
        let s = |mm: &DMatrix<C64>| model.action_s(&Spectrum::of_matrix(mm)).unwrap().total;
        for a in 0..2 {
            for b in 0..2 {
                // Real and imaginary directions give ∂_M + ∂_M̄ and i(∂_M - ∂_M̄).
                let mut mp = m.clone();
                mp[(a, b)] += h;
                let mut mm = m.clone();
                mm[(a, b)] -= h;
                let d_re = (s(&mp) - s(&mm)) / (2.0 * h);
                let mut mp = m.clone();
                mp[(a, b)] += c(0.0, h);
                let mut mm = m.clone();
                mm[(a, b)] -= c(0.0, h);
                let d_im = (s(&mp) - s(&mm)) / (2.0 * h);
                let want_dm = 0.5 * (d_re - c(0.0, 1.0) * d_im);
                let want_dmbar = 0.5 * (d_re + c(0.0, 1.0) * d_im);
                assert!((dm[(a, b)] - want_dm).norm() < 1e-7);
                assert!((dmbar[(a, b)] - want_dmbar).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn trace_identity_rectangular() {
        let m = gaussian(2, 4, 3);
        for q in 1..=4 {
            assert!(trace_identity_residual(&m, q) < 1e-10);
        }
    }
}
