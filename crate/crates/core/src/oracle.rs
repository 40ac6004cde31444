//! Normalized partition functions at small N, from the original weight and from `e^S`.
//!
//! Both representations integrate against the Wishart eigenvalue measure
//! `Δ(s)² Π s_i^{N_r-N_l} e^{-N_r s_i}`; the original one reweights by
//! `e^{-N_r λ Σ s_i^p}`, the loop vertex one by `e^{S(s)}`. Values are divided by
//! the same integral at `λ = 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LvrError, Result};
use crate::exec::{with_workers, Execution};
use crate::lvr_action::{Model, ModelParams, Spectrum};
use crate::mc::{self, McConfig};
use crate::quadrature::GaussLegendre;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Original,
    Lvr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    EigenQuadrature,
    MonteCarlo,
}

/// Tensor-grid resolution: composite Gauss–Legendre per eigenvalue axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub panels: usize,
    pub nodes_per_panel: usize,
}

impl QuadConfig {
    pub fn for_size(n_l: usize) -> Self {
        let panels = match n_l {
            1 => 32,
            2 => 16,
            3 => 8,
            _ => 4,
        };
        QuadConfig { panels, nodes_per_panel: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Quadrature(QuadConfig),
    MonteCarlo(McConfig),
}

pub const MAX_QUADRATURE_N: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "ZRecord")]
pub struct ZResult {
    pub value: C64,
    pub method: MethodKind,
    pub representation: Representation,
    pub error_estimate: f64,
    pub n_samples_or_nodes: usize,
    pub seed: Option<u64>,
    pub params: ModelParams,
}

#[derive(Serialize)]
struct ZRecord {
    value_re: f64,
    value_im: f64,
    method: MethodKind,
    representation: Representation,
    error: f64,
    nodes_or_samples: usize,
    seed: Option<u64>,
    params: ModelParams,
}

impl From<ZResult> for ZRecord {
    fn from(z: ZResult) -> Self {
        ZRecord {
            value_re: z.value.re,
            value_im: z.value.im,
            method: z.method,
            representation: z.representation,
            error: z.error_estimate,
            nodes_or_samples: z.n_samples_or_nodes,
            seed: z.seed,
            params: z.params,
        }
    }
}

pub fn z_original(params: &ModelParams, method: &Method) -> Result<ZResult> {
    partition_function(params, method, Representation::Original)
}

pub fn z_lvr(params: &ModelParams, method: &Method) -> Result<ZResult> {
    partition_function(params, method, Representation::Lvr)
}

pub fn partition_function(params: &ModelParams, method: &Method, rep: Representation) -> Result<ZResult> {
    let lambda = params.lambda;
    if lambda.re < 0.0 {
        return Err(LvrError::DivergentIntegrand(format!(
            "Re λ = {} < 0: e^(-N λ Tr X^p) grows along the positive axis",
            lambda.re
        )));
    }
    let (kind, count, seed) = match method {
        Method::Quadrature(q) => (MethodKind::EigenQuadrature, q.panels * q.nodes_per_panel, None),
        Method::MonteCarlo(c) => (MethodKind::MonteCarlo, c.n_samples, Some(c.seed)),
    };
    let done = |value: C64, error: f64| ZResult {
        value,
        method: kind,
        representation: rep,
        error_estimate: error.max(f64::EPSILON * value.norm()).max(f64::MIN_POSITIVE),
        n_samples_or_nodes: count,
        seed,
        params: *params,
    };
    if lambda == C64::new(0.0, 0.0) {
        return Ok(done(C64::new(1.0, 0.0), 0.0));
    }
    let model = Model::new(*params)?;
    match method {
        Method::Quadrature(q) => {
            let (value, error) = eigen_quadrature(&model, q, rep, Execution::default())?;
            Ok(done(value, error))
        }
        Method::MonteCarlo(c) => {
            let est = monte_carlo(&model, c, rep, Execution::default())?;
            Ok(done(est.mean, est.std_error))
        }
    }
}

/// Upper limit of each eigenvalue axis.
pub fn s_max(params: &ModelParams) -> f64 {
    let n = params.n_r as f64;
    let nu = (params.n_r - params.n_l) as f64;
    let lr = params.lambda.re;
    let confine = if lr > 0.0 { (40.0 / (n * lr)).powf(1.0 / params.p as f64).min(40.0) } else { 40.0 };
    40.0 / n + nu / n + confine
}

/// `∫_{[0,∞)^N} Δ(s)² Π s_i^ν e^{-N_r s_i} ds` in closed form.
pub fn wishart_normalization(n_l: usize, n_r: usize) -> f64 {
    let nu = n_r - n_l;
    let fact = |k: usize| (1..=k).map(|j| j as f64).product::<f64>();
    let c: f64 = (0..n_l).map(|j| fact(j + 1) * fact(j + nu)).product();
    c * (n_r as f64).powi(-((n_l * (n_l + nu)) as i32))
}

struct Grid {
    x: Vec<f64>,
    /// Quadrature weight times the one-body factor `s^ν e^{-N_r s}` and the representation's one-body weight.
    w: Vec<C64>,
    /// Two-body factor `1/(1 + λΣ(a_i, a_j))`, or ones for the original weight.
    pair: Option<Vec<C64>>,
}

fn grid(model: &Model, q: &QuadConfig, rep: Option<Representation>) -> Result<Grid> {
    let params = &model.params;
    let gl = GaussLegendre::new(q.nodes_per_panel);
    let nodes = gl.composite(0.0, s_max(params), q.panels);
    let n_r = params.n_r as f64;
    let nu = (params.n_r - params.n_l) as i32;
    let lambda = params.lambda;
    let p = params.p as i32;
    let x: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let base: Vec<f64> = nodes.iter().map(|&(s, w)| w * s.powi(nu) * (-n_r * s).exp()).collect();
    Ok(match rep {
        None => Grid { w: base.iter().map(|&b| C64::new(b, 0.0)).collect(), x, pair: None },
        Some(Representation::Original) => {
            let w = x
                .iter()
                .zip(&base)
                .map(|(&s, &b)| b * (-n_r * lambda * s.powi(p)).exp())
                .collect();
            Grid { w, x, pair: None }
        }
        Some(Representation::Lvr) => {
            let a = model.check_branch(&x)?;
            let (mat, vec) = model.log_args(lambda, &a);
            let w = base
                .iter()
                .zip(&vec)
                .map(|(&b, v)| b * (-(nu as f64) * v.ln()).exp())
                .collect();
            let pair = mat.iter().map(|m| 1.0 / m).collect();
            Grid { w, x, pair: Some(pair) }
        }
    })
}

/// `Σ_{i_1 < … < i_N} N! Π w Δ² Π pair` over the tensor grid.
fn ordered_sum(g: &Grid, n: usize, exec: Execution) -> C64 {
    let len = g.x.len();
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let pair = |i: usize, j: usize| g.pair.as_ref().map_or(C64::new(1.0, 0.0), |p| p[i * len + j]);
    fn rec(g: &Grid, pair: &dyn Fn(usize, usize) -> C64, idx: &mut Vec<usize>, n: usize, acc: C64) -> C64 {
        if idx.len() == n {
            return acc;
        }
        let start = idx.last().map_or(0, |&l| l + 1);
        let mut total = C64::new(0.0, 0.0);
        for i in start..g.x.len() {
            let mut f = acc * g.w[i] * pair(i, i);
            for &j in idx.iter() {
                let d = g.x[i] - g.x[j];
                // Both orderings (i, j) and (j, i) enter the double sum.
                f *= d * d * pair(i, j) * pair(j, i);
            }
            idx.push(i);
            total += rec(g, pair, idx, n, f);
            idx.pop();
        }
        total
    }
    let rows = exec.map(len, |i0| {
        let mut idx = vec![i0];
        rec(g, &pair, &mut idx, n, g.w[i0] * pair(i0, i0))
    });
    fact * rows.into_iter().sum::<C64>()
}

fn eigen_quadrature(model: &Model, q: &QuadConfig, rep: Representation, exec: Execution) -> Result<(C64, f64)> {
    let n = model.params.n_l;
    if n > MAX_QUADRATURE_N {
        return Err(LvrError::InvalidParameter(format!(
            "eigenvalue quadrature supports N_l <= {MAX_QUADRATURE_N} (got {n})"
        )));
    }
    if q.panels < 2 || q.nodes_per_panel == 0 {
        return Err(LvrError::InvalidParameter("quadrature needs at least 2 panels".into()));
    }
    let eval = |q: &QuadConfig| -> Result<C64> {
        let z = ordered_sum(&grid(model, q, Some(rep))?, n, exec);
        let z0 = ordered_sum(&grid(model, q, None)?, n, exec);
        Ok(z / z0)
    };
    let fine = eval(q)?;
    let coarse = eval(&QuadConfig { panels: q.panels / 2, ..*q })?;
    Ok((fine, (fine - coarse).norm()))
}

/// Relative error of the `λ = 0` grid integral against the closed-form normalization.
pub fn normalization_self_test(n_l: usize, n_r: usize, q: &QuadConfig) -> Result<f64> {
    let params = ModelParams::new(2, C64::new(0.0, 0.0), n_l, n_r)?;
    let model = Model::new(params)?;
    let z0 = ordered_sum(&grid(&model, q, None)?, n_l, Execution::default());
    let exact = wishart_normalization(n_l, n_r);
    Ok((z0.re - exact).abs() / exact + z0.im.abs())
}

/// Stream domains keep the two representations' samples independent under one seed.
const DOMAIN_ORIGINAL: u32 = 1;
const DOMAIN_LVR: u32 = 2;

fn monte_carlo(model: &Model, cfg: &McConfig, rep: Representation, exec: Execution) -> Result<mc::McEstimate> {
    let params = model.params;
    let n_r = params.n_r as f64;
    let p = params.p as i32;
    let domain = match rep {
        Representation::Original => DOMAIN_ORIGINAL,
        Representation::Lvr => DOMAIN_LVR,
    };
    let est = mc::estimate(cfg, domain, exec, |rng, _| {
        let m = mc::gaussian_matrix(rng, params.n_l, params.n_r, 1.0 / n_r);
        let spec = Spectrum::of_matrix(&m);
        match rep {
            Representation::Original => {
                let tr: f64 = spec.values().iter().map(|s| s.powi(p)).sum();
                Ok((-n_r * params.lambda * tr).exp())
            }
            Representation::Lvr => Ok(model.action_s(&spec)?.total.exp()),
        }
    })?;
    if est.std_error > 0.5 * est.mean.norm() {
        return Err(LvrError::VarianceBlowup(format!(
            "standard error {} against mean {}",
            est.std_error, est.mean
        )));
    }
    Ok(est)
}

/// `log Z / (N_l N_r)` with its propagated error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergy {
    pub value: C64,
    pub error: f64,
}

pub fn free_energy(params: &ModelParams, method: &Method, rep: Representation) -> Result<FreeEnergy> {
    let z = partition_function(params, method, rep)?;
    free_energy_of(&z)
}

pub fn free_energy_of(z: &ZResult) -> Result<FreeEnergy> {
    if z.value.norm() == 0.0 {
        return Err(LvrError::InvalidParameter("Z vanishes; log undefined".into()));
    }
    let norm = (z.params.n_l * z.params.n_r) as f64;
    Ok(FreeEnergy { value: z.value.ln() / norm, error: z.error_estimate / (z.value.norm() * norm) })
}

/// Worker-count wrapper so CLI runs honor `--workers` for quadrature as well.
pub fn partition_function_with_workers(
    params: &ModelParams,
    method: &Method,
    rep: Representation,
    workers: usize,
) -> Result<ZResult> {
    with_workers(workers, || partition_function(params, method, rep))
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub pass: bool,
    pub spectra: usize,
    pub min_factor: f64,
    pub worst_spectrum: usize,
}

/// Checks `1 + λΣ_k a_i^k a_j^{p-1-k} > 0` on every pair of every spectrum.
pub fn jacobian_positivity_check(params: &ModelParams, spectra: &[Spectrum]) -> Result<PositivityReport> {
    let lambda = params.lambda;
    if !(lambda.im == 0.0 && lambda.re > 0.0) {
        return Err(LvrError::InvalidParameter(format!("positivity check needs real λ > 0 (got {lambda})")));
    }
    let model = Model::new(*params)?;
    let mut min_factor = f64::INFINITY;
    let mut worst = 0;
    let mut pass = true;
    for (k, spec) in spectra.iter().enumerate() {
        for f in model.jacobian_factors(spec)? {
            if f.im.abs() > 1e-12 * f.norm() || !(f.re > 0.0) {
                pass = false;
            }
            if f.re < min_factor {
                min_factor = f.re;
                worst = k;
            }
        }
    }
    Ok(PositivityReport { pass, spectra: spectra.len(), min_factor, worst_spectrum: worst })
}

/// Solves for `g(λ)/λ ≈ Σ_j b_j λ^j` through `λ_k = h k`, `k = 1..=points`.
fn taylor_fit(h: f64, points: usize, mut g: impl FnMut(f64) -> Result<f64>) -> Result<Vec<f64>> {
    if !(h > 0.0) || points == 0 {
        return Err(LvrError::InvalidParameter("need h > 0 and at least one point".into()));
    }
    let mut rhs = DVector::zeros(points);
    let vander = DMatrix::from_fn(points, points, |k, j| (h * (k + 1) as f64).powi(j as i32));
    for k in 0..points {
        let lam = h * (k + 1) as f64;
        rhs[k] = g(lam)? / lam;
    }
    let sol = vander.lu().solve(&rhs).ok_or(LvrError::SingularMatrix(0.0))?;
    Ok(sol.iter().copied().collect())
}

/// Leading coefficients `c_1, c_2, …` of `Z(λ) = 1 + c_1 λ + c_2 λ² + …` at `N = 1`.
///
/// `(Z(λ) - 1)/λ` is interpolated by a polynomial through `λ_k = h k`, `k = 1..=points`;
/// the truncation error in `c_n` is of order `c_{points+1} h^{points+1-n}`.
pub fn series_coefficients_n1(p: u32, h: f64, points: usize) -> Result<Vec<f64>> {
    let q = QuadConfig { panels: 64, nodes_per_panel: 16 };
    taylor_fit(h, points, |lam| {
        let params = ModelParams::square(p, C64::new(lam, 0.0), 1)?;
        Ok(z_original(&params, &Method::Quadrature(q))?.value.re - 1.0)
    })
}

/// Leading coefficients of `F(λ) = log(Z/Z_0)/(N_l N_r)` along real `λ > 0`, by the same fit.
pub fn free_energy_coefficients(
    p: u32,
    n_l: usize,
    n_r: usize,
    rep: Representation,
    h: f64,
    points: usize,
) -> Result<Vec<f64>> {
    let q = QuadConfig::for_size(n_l);
    taylor_fit(h, points, |lam| {
        let params = ModelParams::new(p, C64::new(lam, 0.0), n_l, n_r)?;
        Ok(free_energy(&params, &Method::Quadrature(q), rep)?.value.re)
    })
}
