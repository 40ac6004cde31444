//! Monte Carlo tree amplitudes and truncated free-energy sums (square case).

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LvrError, Result};
use crate::exec::Execution;
use crate::lvr_action::{Model, ModelParams, Spectrum};
use crate::mc::{estimate, gaussian_matrix, McConfig};
use crate::quadrature::GaussLegendre;
use crate::C64;

pub const DOMAIN_TRIVIAL: u32 = 3;
pub const DOMAIN_TREE2: u32 = 4;
pub const W_NODES: usize = 8;
pub const MAX_TREE2_N: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeEstimate {
    pub tree: String,
    pub value: C64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// `|value(2 W_NODES) - value(W_NODES)|` for the `w`-integral; zero when there is none.
    pub w_refinement: f64,
}

fn check(params: &ModelParams) -> Result<()> {
    if !params.is_square() {
        return Err(LvrError::InvalidParameter("tree amplitudes are implemented for the square case".into()));
    }
    if !is_zero(params.lambda) && !params.is_in_pacman() {
        return Err(LvrError::InvalidParameter(format!("λ = {} outside the pacman domain", params.lambda)));
    }
    Ok(())
}

fn is_zero(l: C64) -> bool {
    l.re == 0.0 && l.im == 0.0
}

fn action_of(model: &Model, m: &DMatrix<C64>) -> Result<C64> {
    let spec = Spectrum::of_matrix(m);
    Ok(model.action_s(&spec)?.total)
}

/// `A_∅ = N^{-2} E[S(λ, X)]`.
pub fn amplitude_trivial(params: &ModelParams, cfg: &McConfig) -> Result<AmplitudeEstimate> {
    check(params)?;
    let n = params.n_l;
    let mut out = AmplitudeEstimate {
        tree: "empty".into(),
        value: C64::new(0.0, 0.0),
        std_error: 0.0,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        w_refinement: 0.0,
    };
    if is_zero(params.lambda) {
        return Ok(out);
    }
    let model = Model::new(*params)?;
    let var = 1.0 / n as f64;
    let e = estimate(cfg, DOMAIN_TRIVIAL, Execution::default(), |rng, _| {
        action_of(&model, &gaussian_matrix(rng, n, n, var))
    })?;
    let norm = (n * n) as f64;
    out.value = e.mean / norm;
    out.std_error = e.std_error / norm;
    Ok(out)
}

/// `Σ_ab (∂S/∂M̄)(M_1)_ab (∂S/∂M)(M_2)_ab`.
fn oriented_contraction(model: &Model, m1: &DMatrix<C64>, m2: &DMatrix<C64>) -> Result<C64> {
    let (_, dbar1) = model.action_matrix_gradient(m1)?;
    let (d2, _) = model.action_matrix_gradient(m2)?;
    Ok(dbar1.component_mul(&d2).sum())
}

/// `∫_0^1 dw` with `w = sin²θ`, so the replica mixing `(√w, √(1-w)) = (sin θ, cos θ)` is smooth.
fn w_integral(
    model: &Model,
    g: &[DMatrix<C64>; 3],
    gl: &GaussLegendre,
) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for (theta, wt) in gl.on_interval(0.0, std::f64::consts::FRAC_PI_2) {
        let (s, c) = theta.sin_cos();
        let m1 = &g[0] * C64::new(s, 0.0) + &g[1] * C64::new(c, 0.0);
        let m2 = &g[0] * C64::new(s, 0.0) + &g[2] * C64::new(c, 0.0);
        acc += oriented_contraction(model, &m1, &m2)? * (wt * 2.0 * s * c);
    }
    Ok(acc)
}

/// One oriented two-vertex tree: `N^{-3} ∫_0^1 dw E_{C(w)}[Σ_ab (∂S/∂M̄)_1 (∂S/∂M)_2]`.
///
/// Replicas are `M_k = √w G_0 + √(1-w) G_k` with independent `G_0, G_1, G_2` of variance `1/N`.
/// Every sample integrates its own triple over `w` at `W_NODES` and `2 W_NODES` points.
pub fn amplitude_tree2(params: &ModelParams, cfg: &McConfig) -> Result<AmplitudeEstimate> {
    check(params)?;
    let n = params.n_l;
    if n > MAX_TREE2_N {
        return Err(LvrError::SizeBound { size: n, max: MAX_TREE2_N });
    }
    let mut out = AmplitudeEstimate {
        tree: "edge(0->1)".into(),
        value: C64::new(0.0, 0.0),
        std_error: 0.0,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        w_refinement: 0.0,
    };
    if is_zero(params.lambda) {
        return Ok(out);
    }
    let model = Model::new(*params)?;
    let var = 1.0 / n as f64;
    let coarse = GaussLegendre::new(W_NODES);
    let fine = GaussLegendre::new(2 * W_NODES);
    let draw = |rng: &mut ChaCha8Rng| -> [DMatrix<C64>; 3] {
        [gaussian_matrix(rng, n, n, var), gaussian_matrix(rng, n, n, var), gaussian_matrix(rng, n, n, var)]
    };
    // Both rules run on identical triples: the batch streams are replayed.
    let e_fine = estimate(cfg, DOMAIN_TREE2, Execution::default(), |rng, _| w_integral(&model, &draw(rng), &fine))?;
    let e_coarse = estimate(cfg, DOMAIN_TREE2, Execution::default(), |rng, _| w_integral(&model, &draw(rng), &coarse))?;
    let norm = (n * n * n) as f64;
    out.value = e_fine.mean / norm;
    out.std_error = e_fine.std_error / norm;
    out.w_refinement = (e_fine.mean - e_coarse.mean).norm() / norm;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialSum {
    pub n_max: usize,
    pub value: C64,
    pub std_error: f64,
    pub amplitudes: Vec<AmplitudeEstimate>,
}

pub const MAX_PARTIAL_ORDER: usize = 2;

/// `Σ_{n ≤ n_max} (1/n!) Σ_T A_T`; at `n = 2` the two orientations are equal, so `A_T` counts once.
pub fn lve_partial_sum(params: &ModelParams, cfg: &McConfig, n_max: usize) -> Result<PartialSum> {
    if n_max == 0 || n_max > MAX_PARTIAL_ORDER {
        return Err(LvrError::InvalidParameter(format!("n_max must be in 1..={MAX_PARTIAL_ORDER}")));
    }
    let a0 = amplitude_trivial(params, cfg)?;
    let mut value = a0.value;
    let mut var = a0.std_error.powi(2);
    let mut amplitudes = vec![a0];
    if n_max >= 2 {
        let t = amplitude_tree2(params, cfg)?;
        value += t.value;
        var += t.std_error.powi(2);
        amplitudes.push(t);
    }
    Ok(PartialSum { n_max, value, std_error: var.sqrt(), amplitudes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, n: usize) -> ModelParams {
        ModelParams::square(2, C64::new(lambda, 0.0), n).unwrap()
    }

    #[test]
    fn zero_coupling() {
        let cfg = McConfig::new(16, 1);
        assert_eq!(amplitude_trivial(&params(0.0, 2), &cfg).unwrap().value, C64::new(0.0, 0.0));
        assert_eq!(amplitude_tree2(&params(0.0, 2), &cfg).unwrap().value, C64::new(0.0, 0.0));
        assert_eq!(lve_partial_sum(&params(0.0, 2), &cfg, 2).unwrap().value, C64::new(0.0, 0.0));
    }

    #[test]
    fn deterministic_and_rejects_rectangular() {
        let cfg = McConfig::new(2000, 9);
        let a = amplitude_tree2(&params(0.05, 2), &cfg).unwrap();
        let b = amplitude_tree2(&params(0.05, 2), &cfg).unwrap();
        assert_eq!(a.value, b.value);
        assert!(a.std_error > 0.0);
        let rect = ModelParams::new(2, C64::new(0.1, 0.0), 1, 2).unwrap();
        assert!(amplitude_trivial(&rect, &cfg).is_err());
        assert!(matches!(amplitude_tree2(&params(0.05, 4), &cfg), Err(LvrError::SizeBound { .. })));
    }
}
