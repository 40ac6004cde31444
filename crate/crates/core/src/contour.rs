//! Keyhole contours, Cauchy reconstruction and the factorized contour form of `S`.
//!
//! A keyhole `Γ(r, R, ψ)` runs out along `arg u = -ψ` from `r` to `R`, around the
//! arc `|u| = R`, back in along `arg u = ψ`, and the long way round `|u| = r`. It
//! encloses the disk `|u| < r` together with the wedge `|arg u| < ψ, |u| < R`.
//! Weights carry the `1/(2πi)` of the Cauchy formula, so `∮ dw/(w - s) = 1` for
//! `s` inside.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{LvrError, Result};
use crate::exec::Execution;
use crate::fuss_catalan::cut_start;
use crate::lvr_action::{Model, ModelParams, Spectrum};
use crate::quadrature::GaussLegendre;
use crate::C64;

const PANEL: usize = 16;
const MAX_PANELS: usize = 256;
const I: C64 = C64::new(0.0, 1.0);

/// One piece of a keyhole, parametrized over `s ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Piece {
    /// `ρ + c = (from + c) ((to + c)/(from + c))^s` at fixed angle, with `c = shift`.
    ///
    /// `shift = 0` is geometric grading; a positive shift flattens it towards uniform.
    Radial { angle: f64, from: f64, to: f64, shift: f64 },
    /// `θ = from + s (to - from)` at fixed radius.
    Arc { radius: f64, from: f64, to: f64 },
}

impl Piece {
    pub fn point(&self, s: f64) -> C64 {
        match *self {
            Piece::Radial { angle, from, to, shift } => {
                let rho = (from + shift) * ((to + shift) / (from + shift)).powf(s) - shift;
                C64::from_polar(rho, angle)
            }
            Piece::Arc { radius, from, to } => C64::from_polar(radius, from + s * (to - from)),
        }
    }

    pub fn tangent(&self, s: f64) -> C64 {
        match *self {
            Piece::Radial { angle, from, to, shift } => {
                let ratio = (to + shift) / (from + shift);
                C64::from_polar((from + shift) * ratio.powf(s) * ratio.ln(), angle)
            }
            Piece::Arc { radius, from, to } => {
                I * C64::from_polar(radius, from + s * (to - from)) * (to - from)
            }
        }
    }
}

/// Quadrature node on a contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourNode {
    pub point: C64,
    /// `γ'(s) w / (2πi)`.
    pub weight: C64,
    /// `|γ'(s)| w / (2π)`, the arclength measure.
    pub arc_weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KeyholeContour {
    pub r: f64,
    /// Outer radius; `None` for the infinite keyhole.
    pub big_r: Option<f64>,
    pub psi: f64,
    pub pieces: Vec<Piece>,
    pub nodes: Vec<ContourNode>,
}

fn panel_nodes(piece: &Piece, panels: usize, gl: &GaussLegendre, out: &mut Vec<ContourNode>) {
    for (s, w) in gl.composite(0.0, 1.0, panels) {
        let g = piece.tangent(s);
        out.push(ContourNode {
            point: piece.point(s),
            weight: g * w / (2.0 * PI * I),
            arc_weight: g.norm() * w / (2.0 * PI),
        });
    }
}

fn check_geometry(r: f64, big_r: f64, psi: f64) -> Result<()> {
    if !(r > 0.0 && big_r > r && big_r.is_finite()) {
        return Err(LvrError::BadGeometry(format!("need 0 < r < R < inf (r = {r}, R = {big_r})")));
    }
    if !(psi > 0.0 && psi < 0.5 * PI) {
        return Err(LvrError::BadGeometry(format!("psi = {psi} outside (0, pi/2)")));
    }
    Ok(())
}

/// Finite keyhole with at least `nodes_per_piece` Gauss–Legendre nodes per piece (in panels of 16).
///
/// Panels are doubled until the winding self-test at `s = (r + R)/2` passes to 1e-10,
/// which matters for thin wedges where `s` sits close to the radial legs.
pub fn make_keyhole(r: f64, big_r: f64, psi: f64, nodes_per_piece: usize) -> Result<KeyholeContour> {
    check_geometry(r, big_r, psi)?;
    if nodes_per_piece == 0 {
        return Err(LvrError::BadGeometry("no quadrature nodes".into()));
    }
    let shift = 0.25 * big_r;
    let pieces = vec![
        Piece::Radial { angle: -psi, from: r, to: big_r, shift },
        Piece::Arc { radius: big_r, from: -psi, to: psi },
        Piece::Radial { angle: psi, from: big_r, to: r, shift },
        Piece::Arc { radius: r, from: psi, to: 2.0 * PI - psi },
    ];
    let gl = GaussLegendre::new(PANEL);
    let s = 0.5 * (r + big_r);
    let mut panels = nodes_per_piece.div_ceil(PANEL);
    loop {
        let mut nodes = Vec::with_capacity(4 * panels * PANEL);
        for piece in &pieces {
            panel_nodes(piece, panels, &gl, &mut nodes);
        }
        let c = KeyholeContour { r, big_r: Some(big_r), psi, pieces: pieces.clone(), nodes };
        let wind = c.winding(C64::new(s, 0.0));
        if (wind - 1.0).norm() <= 1e-10 {
            return Ok(c);
        }
        if panels >= MAX_PANELS {
            return Err(LvrError::BadGeometry(format!(
                "winding self-test gave {wind} for s = {s} with {} nodes per piece",
                panels * PANEL
            )));
        }
        panels *= 2;
    }
}

/// Infinite keyhole (no outer arc), truncated at `r_trunc`.
///
/// The radial legs use `panels_per_decade` panels of `nodes_per_panel` nodes per
/// factor of ten in radius; the small arc uses `arc_panels` panels.
pub fn make_infinite_keyhole(
    r: f64,
    psi: f64,
    r_trunc: f64,
    panels_per_decade: usize,
    nodes_per_panel: usize,
    arc_panels: usize,
) -> Result<KeyholeContour> {
    check_geometry(r, r_trunc, psi)?;
    let decades = (r_trunc / r).log10();
    let panels = ((decades * panels_per_decade as f64).ceil() as usize).max(1);
    let pieces = vec![
        Piece::Radial { angle: -psi, from: r, to: r_trunc, shift: 0.0 },
        Piece::Radial { angle: psi, from: r_trunc, to: r, shift: 0.0 },
        Piece::Arc { radius: r, from: psi, to: 2.0 * PI - psi },
    ];
    let gl = GaussLegendre::new(nodes_per_panel);
    let mut nodes = Vec::new();
    panel_nodes(&pieces[0], panels, &gl, &mut nodes);
    panel_nodes(&pieces[1], panels, &gl, &mut nodes);
    panel_nodes(&pieces[2], arc_panels.max(1), &gl, &mut nodes);
    Ok(KeyholeContour { r, big_r: None, psi, pieces, nodes })
}

impl KeyholeContour {
    /// `∮ f(w) dw` with the `1/(2πi)` factor included.
    pub fn integrate(&self, f: impl Fn(C64) -> C64) -> C64 {
        self.nodes.iter().map(|n| f(n.point) * n.weight).sum()
    }

    /// `∮ dw / (w - s)`: 1 inside, 0 outside.
    pub fn winding(&self, s: C64) -> C64 {
        self.integrate(|w| 1.0 / (w - s))
    }

    /// Largest mismatch between consecutive piece endpoints, including the wrap-around.
    pub fn closure_gap(&self) -> f64 {
        let n = self.pieces.len();
        (0..n)
            .map(|k| (self.pieces[k].point(1.0) - self.pieces[(k + 1) % n].point(0.0)).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.big_r.is_some()
    }

    /// Whether `z` lies in the region enclosed by the (finite) contour.
    pub fn encloses(&self, z: C64) -> bool {
        let m = z.norm();
        let outer = self.big_r.unwrap_or(f64::INFINITY);
        m < self.r || (m < outer && z.arg().abs() < self.psi)
    }

    /// Whether `inner` (with its enclosed region) lies strictly inside `self`.
    pub fn strictly_contains(&self, inner: &KeyholeContour) -> bool {
        let outer_ok = match (self.big_r, inner.big_r) {
            (Some(a), Some(b)) => b < a,
            (None, _) => true,
            (Some(_), None) => false,
        };
        inner.r < self.r && inner.psi < self.psi && outer_ok
    }

    /// Points evenly spread in the piece parameter.
    pub fn sample_points(&self, samples: usize) -> Vec<C64> {
        let per = samples.div_ceil(self.pieces.len()).max(1);
        self.pieces
            .iter()
            .flat_map(|p| (0..per).map(move |k| p.point((k as f64 + 0.5) / per as f64)))
            .collect()
    }
}

/// Three nested keyholes `Γ2 ⊂ Γ1 ⊂ Γ0`.
///
/// `u` runs over `Γ0`, `v1` over `Γ1` and `v2` over `Γ2`. Both `v` contours sit
/// inside `Γ0` so that `u ↦ a(t,u)/((v1-u)(v2-u))` keeps its poles inside, and
/// `Γ2` sits inside `Γ1` so that `v1 ↦ 1/(v1 - v2)` does.
#[derive(Debug, Clone, Serialize)]
pub struct ContourTriple {
    pub gamma0: KeyholeContour,
    pub gamma1: KeyholeContour,
    pub gamma2: KeyholeContour,
}

impl ContourTriple {
    pub fn new(gamma0: KeyholeContour, gamma1: KeyholeContour, gamma2: KeyholeContour) -> Result<Self> {
        if !gamma0.strictly_contains(&gamma1) || !gamma1.strictly_contains(&gamma2) {
            return Err(LvrError::BadGeometry(
                "contours must be nested as gamma2 inside gamma1 inside gamma0".into(),
            ));
        }
        Ok(ContourTriple { gamma0, gamma1, gamma2 })
    }

    /// A triple adapted to the spectrum and coupling, with `nodes_per_piece` nodes per piece.
    pub fn for_spectrum(spec: &Spectrum, params: &ModelParams, nodes_per_piece: usize) -> Result<Self> {
        let (r0, psi0) = admissible_size(params);
        let r2_outer = 1.0 + spec.max();
        let gamma0 = make_keyhole(r0, 2.0 * r2_outer, psi0, nodes_per_piece)?;
        let gamma1 = make_keyhole(0.75 * r0, 1.5 * r2_outer, 0.7 * psi0, nodes_per_piece)?;
        let gamma2 = make_keyhole(0.5 * r0, r2_outer, 0.4 * psi0, nodes_per_piece)?;
        let t = ContourTriple::new(gamma0, gamma1, gamma2)?;
        t.validate_for(spec, params)?;
        Ok(t)
    }

    /// Checks the analyticity and enclosure conditions for this spectrum and coupling.
    pub fn validate_for(&self, spec: &Spectrum, params: &ModelParams) -> Result<()> {
        let need = 1.0 + spec.max();
        match self.gamma2.big_r {
            Some(r2) if r2 >= need => {}
            _ => {
                return Err(LvrError::BadGeometry(format!(
                    "innermost outer radius must be at least 1 + max eigenvalue = {need}"
                )))
            }
        }
        for g in [&self.gamma0, &self.gamma1, &self.gamma2] {
            check_cut_conditions(g, params)?;
        }
        Ok(())
    }
}

/// Largest `r` and `ψ` allowed at this coupling, with a safety factor.
fn admissible_size(params: &ModelParams) -> (f64, f64) {
    let p = params.p as f64;
    let eps = PI - params.lambda.arg().abs();
    let psi = (0.8 * eps / (2.0 * (p - 1.0))).min(1.2);
    let lam = params.lambda.norm().max(1e-300);
    let r = (0.8 * (cut_start(params.p) / lam).powf(1.0 / (p - 1.0))).min(0.5);
    (r, psi)
}

fn check_cut_conditions(g: &KeyholeContour, params: &ModelParams) -> Result<()> {
    let p = params.p as f64;
    let eps = PI - params.lambda.arg().abs();
    if g.psi >= eps / (2.0 * (p - 1.0)) {
        return Err(LvrError::BadGeometry(format!(
            "psi = {} must be below (pi - |arg lambda|)/(2(p-1)) = {}",
            g.psi,
            eps / (2.0 * (p - 1.0))
        )));
    }
    if g.r.powf(p - 1.0) * params.lambda.norm() >= cut_start(params.p) {
        return Err(LvrError::BadGeometry(format!(
            "r^(p-1)|lambda| = {} reaches the cut start {}",
            g.r.powf(p - 1.0) * params.lambda.norm(),
            cut_start(params.p)
        )));
    }
    Ok(())
}

/// `∮ a(λ,u)/(u - s_i) du` for each eigenvalue.
pub fn cauchy_reconstruct_a(model: &Model, spec: &Spectrum, contour: &KeyholeContour) -> Result<Vec<C64>> {
    let lambda = model.lambda();
    let a: Vec<C64> = contour
        .nodes
        .iter()
        .map(|n| model.fc().a_eval(lambda, n.point))
        .collect::<Result<_>>()?;
    Ok(spec
        .values()
        .iter()
        .map(|&s| {
            contour
                .nodes
                .iter()
                .zip(&a)
                .map(|(n, &an)| an * n.weight / (n.point - s))
                .sum()
        })
        .collect())
}

/// Collision guard for `|v1 - v2|` in the ψ weight.
pub const COLLISION_GUARD: f64 = 1e-9;

/// `∂_t[t a^k(t,v1) a^m(t,v2)]` from values and t-derivatives.
fn dt_product(t: C64, k: i32, m: i32, (a1, d1): (C64, C64), (a2, d2): (C64, C64)) -> C64 {
    let mut in_t = C64::new(0.0, 0.0);
    if k > 0 {
        in_t += d1 * a1.powi(k - 1) * a2.powi(m) * k as f64;
    }
    if m > 0 {
        in_t += d2 * a1.powi(k) * a2.powi(m - 1) * m as f64;
    }
    a1.powi(k) * a2.powi(m) + t * in_t
}

/// `Σ_{k=1}^{p-2} ∂_t[t a^k(t,v1) a^{p-k-1}(t,v2)]`.
fn phi_sum(p: i32, t: C64, v1: (C64, C64), v2: (C64, C64)) -> C64 {
    (1..=(p - 2)).map(|k| dt_product(t, k, p - k - 1, v1, v2)).sum()
}

/// `φ(t,u,v1,v2) = -Σ_{k=1}^{p-2} a(t,u)/((v1-u)(v2-u)) ∂_t[t a^k(t,v1) a^{p-k-1}(t,v2)]`.
pub fn weight_phi(model: &Model, t: C64, u: C64, v1: C64, v2: C64) -> Result<C64> {
    let p = model.p() as i32;
    if p == 2 {
        return Ok(C64::new(0.0, 0.0));
    }
    let fc = model.fc();
    let au = fc.a_eval(t, u)?;
    let s = phi_sum(p, t, fc.a_with_dt(t, v1)?, fc.a_with_dt(t, v2)?);
    Ok(-au / ((v1 - u) * (v2 - u)) * s)
}

/// `ψ(t,v1,v2) = -(2/(v1-v2)) a(t,v1) ∂_t[t a^{p-1}(t,v2)]`.
pub fn weight_psi(model: &Model, t: C64, v1: C64, v2: C64) -> Result<C64> {
    let gap = (v1 - v2).norm();
    if gap < COLLISION_GUARD {
        return Err(LvrError::NearCollision(gap));
    }
    let p = model.p() as i32;
    let fc = model.fc();
    let a1 = fc.a_eval(t, v1)?;
    let (a2, d2) = fc.a_with_dt(t, v2)?;
    let inner = dt_product(t, 0, p - 1, (C64::new(1.0, 0.0), C64::new(0.0, 0.0)), (a2, d2));
    Ok(-2.0 / (v1 - v2) * a1 * inner)
}

struct NodeData {
    point: C64,
    weight: C64,
    a: C64,
    da: C64,
    resolvent: C64,
}

fn node_data(model: &Model, t: C64, g: &KeyholeContour, spec: &Spectrum) -> Result<Vec<NodeData>> {
    g.nodes
        .iter()
        .map(|n| {
            let (a, da) = model.fc().a_with_dt(t, n.point)?;
            let resolvent = spec.values().iter().map(|&s| 1.0 / (n.point - s)).sum();
            Ok(NodeData { point: n.point, weight: n.weight, a, da, resolvent })
        })
        .collect()
}

/// `∂_t S(t)` from the factorized contour form at a single coupling `t`.
pub fn action_dt_contour(
    model: &Model,
    spec: &Spectrum,
    triple: &ContourTriple,
    t: C64,
    exec: Execution,
) -> Result<C64> {
    let p = model.p() as i32;
    let fc = model.fc();
    let a0: Vec<(C64, C64)> = triple
        .gamma0
        .nodes
        .iter()
        .map(|n| Ok((n.point, fc.a_eval(t, n.point)? * n.weight)))
        .collect::<Result<_>>()?;
    let n1 = node_data(model, t, &triple.gamma1, spec)?;
    let n2 = node_data(model, t, &triple.gamma2, spec)?;
    // C(v) = ∮ a(t,u)/(v-u) du, so that ∮ a/((v1-u)(v2-u)) du = (C(v1) - C(v2))/(v2 - v1).
    let cauchy = |v: C64| -> C64 { a0.iter().map(|&(u, wa)| wa / (v - u)).sum() };
    let c1: Vec<C64> = n1.iter().map(|d| cauchy(d.point)).collect();
    let c2: Vec<C64> = n2.iter().map(|d| cauchy(d.point)).collect();
    let rows = exec.map(n1.len(), |i| {
        let d1 = &n1[i];
        let mut acc = C64::new(0.0, 0.0);
        for (j, d2) in n2.iter().enumerate() {
            let diff = d1.point - d2.point;
            let mut w = C64::new(0.0, 0.0);
            if p > 2 {
                let k = (c2[j] - c1[i]) / diff;
                w -= k * phi_sum(p, t, (d1.a, d1.da), (d2.a, d2.da));
            }
            let inner = d2.a.powi(p - 1) + t * d2.da * d2.a.powi(p - 2) * (p - 1) as f64;
            w -= 2.0 / diff * d1.a * inner;
            acc += w * d2.weight * d2.resolvent;
        }
        acc * d1.weight * d1.resolvent
    });
    Ok(rows.into_iter().sum())
}

/// `S(λ) = ∫_0^λ dt [∮∮∮ φ R + ∮∮ ψ R]` along the straight segment `t = τλ`.
pub fn reconstruct_s(
    model: &Model,
    spec: &Spectrum,
    triple: &ContourTriple,
    t_nodes: usize,
    exec: Execution,
) -> Result<C64> {
    if spec.len() != model.params.n_l || !model.params.is_square() {
        return Err(LvrError::InvalidParameter(
            "contour reconstruction needs a square model and a matching spectrum".into(),
        ));
    }
    triple.validate_for(spec, &model.params)?;
    let lambda = model.lambda();
    if lambda.norm() == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let gl = GaussLegendre::new(t_nodes.max(1));
    let mut total = C64::new(0.0, 0.0);
    for (tau, w) in gl.on_interval(0.0, 1.0) {
        total += action_dt_contour(model, spec, triple, lambda * tau, exec)? * w;
    }
    Ok(total * lambda)
}

/// Outcome of comparing the contour reconstruction against the spectral action.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub contour_value: C64,
    pub spectral_value: C64,
    pub rel_error: f64,
    pub nodes_per_piece: usize,
    pub t_nodes: usize,
}

/// Reconstructs `S` with node doubling until two levels agree, then compares with `action_s`.
pub fn verify_reconstruct_s(model: &Model, spec: &Spectrum, rel_tol: f64, exec: Execution) -> Result<ReconstructionReport> {
    let reference = model.action_s(spec)?.total;
    let mut nodes = 64;
    let mut t_nodes = 12;
    let mut prev: Option<C64> = None;
    loop {
        let triple = ContourTriple::for_spectrum(spec, &model.params, nodes)?;
        let value = reconstruct_s(model, spec, &triple, t_nodes, exec)?;
        let scale = reference.norm().max(1e-300);
        if let Some(pv) = prev {
            if (value - pv).norm() / scale < 0.1 * rel_tol || nodes >= 1024 {
                let rel = (value - reference).norm() / scale;
                if rel > rel_tol {
                    return Err(LvrError::ToleranceNotMet {
                        what: "contour reconstruction of S".into(),
                        got: rel,
                        tol: rel_tol,
                    });
                }
                return Ok(ReconstructionReport {
                    contour_value: value,
                    spectral_value: reference,
                    rel_error: rel,
                    nodes_per_piece: nodes,
                    t_nodes,
                });
            }
        }
        prev = Some(value);
        nodes *= 2;
        t_nodes += 4;
    }
}

/// The sector `{|z| ≥ r^{p-1} η, |arg z| ≤ ε/2}` that must avoid `-λu^{p-1}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CutSector {
    pub p: u32,
    pub r: f64,
    pub epsilon: f64,
    pub eta: f64,
}

impl CutSector {
    pub fn new(p: u32, r: f64, epsilon: f64, eta: f64) -> Result<Self> {
        if r.powi(p as i32 - 1) * eta >= cut_start(p) {
            return Err(LvrError::BadGeometry(format!(
                "r^(p-1) eta = {} must be below R_p = {}",
                r.powi(p as i32 - 1) * eta,
                cut_start(p)
            )));
        }
        Ok(CutSector { p, r, epsilon, eta })
    }

    pub fn inner_radius(&self) -> f64 {
        self.r.powi(self.p as i32 - 1) * self.eta
    }

    /// Positive outside the sector, nonpositive inside.
    pub fn margin(&self, z: C64) -> f64 {
        let radial = self.inner_radius() - z.norm();
        let angular = z.arg().abs() - 0.5 * self.epsilon;
        radial.max(angular)
    }

    pub fn contains(&self, z: C64) -> bool {
        self.margin(z) <= 0.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub pass: bool,
    pub samples: usize,
    pub violations: usize,
    pub min_margin: f64,
    pub worst_u: C64,
}

/// Checks that `z = -λu^{p-1}` avoids the cut sector for `u` sampled on the contour.
pub fn cut_sector_audit(params: &ModelParams, contour: &KeyholeContour, samples: usize) -> Result<AuditReport> {
    let sector = CutSector::new(params.p, contour.r, params.pacman.epsilon, params.pacman.eta)?;
    let pts = contour.sample_points(samples);
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    let mut worst_u = pts[0];
    for &u in &pts {
        let z = -params.lambda * u.powi(params.p as i32 - 1);
        let m = sector.margin(z);
        if m <= 0.0 {
            violations += 1;
        }
        if m < min_margin {
            min_margin = m;
            worst_u = u;
        }
    }
    Ok(AuditReport { pass: violations == 0, samples: pts.len(), violations, min_margin, worst_u })
}

/// Resolution and truncation of the bound-integral quadrature.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundConfig {
    pub panels_per_decade: usize,
    pub nodes_per_panel: usize,
    pub arc_panels: usize,
    pub t_nodes: usize,
    /// Requested relative accuracy; the truncation tail must stay below 1% of it.
    pub rel_tol: f64,
    pub max_decades: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            panels_per_decade: 1,
            nodes_per_panel: 10,
            arc_panels: 2,
            t_nodes: 10,
            rel_tol: 0.05,
            max_decades: 24.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundIntegrals {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// Estimated tails beyond the truncation radius, already included in the values.
    pub tails: [f64; 3],
    pub r_trunc: f64,
    pub contour_r: [f64; 3],
    pub contour_psi: [f64; 3],
}

/// Sums per-decade contributions and estimates the geometric tail from the last two.
fn with_tail(bins: &[f64]) -> Option<(f64, f64)> {
    let total: f64 = bins.iter().sum();
    let n = bins.len();
    if total == 0.0 {
        return Some((0.0, 0.0));
    }
    if n < 3 {
        return None;
    }
    let (d1, d2) = (bins[n - 1], bins[n - 2]);
    if d1 == 0.0 {
        return Some((total, 0.0));
    }
    let q = d1 / d2;
    if !(q < 1.0) {
        return None;
    }
    let tail = d1 * q / (1.0 - q);
    Some((total + tail, tail))
}

/// Absolute-value integrals `I1`, `I2`, `I3` over infinite keyholes.
///
/// `I1 = ∫|dt| ∮|du|∮|dv1|∮|dv2| |φ| (1+|v1|)^{-3/2} (1+|v2|)^{-1}`, and `I2`, `I3`
/// are the `ψ` integrals with the decay exponents `(3/2, 1)` and `(1, 3/2)`. The
/// t-path is `t = |λ| τ⁴ e^{i arg λ}` to soften the integrable singularity at `t = 0`.
pub fn bound_integrals(params: &ModelParams, cfg: &BoundConfig, exec: Execution) -> Result<BoundIntegrals> {
    let model = Model::new(*params)?;
    let (r0, psi0) = admissible_size(params);
    let rs = [r0, 0.75 * r0, 0.5 * r0];
    let psis = [psi0, 0.6 * psi0, 0.2 * psi0];
    let mut decades = 8.0f64;
    loop {
        let r_trunc = r0 * 10f64.powf(decades);
        let gs: Vec<KeyholeContour> = (0..3)
            .map(|j| make_infinite_keyhole(rs[j], psis[j], r_trunc, cfg.panels_per_decade, cfg.nodes_per_panel, cfg.arc_panels))
            .collect::<Result<_>>()?;
        let res = bound_integrals_on(&model, &gs, cfg, decades.ceil() as usize + 1, exec)?;
        let certified = |v: f64, tail: f64| tail <= 0.01 * cfg.rel_tol * v;
        let ok = certified(res.i1, res.tails[0]) && certified(res.i2, res.tails[1]) && certified(res.i3, res.tails[2]);
        if ok {
            return Ok(BoundIntegrals { r_trunc, contour_r: rs, contour_psi: psis, ..res });
        }
        if decades >= cfg.max_decades {
            return Err(LvrError::QuadratureFailure(format!(
                "truncation tail not certified at R = {r_trunc:e} (tails {:?})",
                res.tails
            )));
        }
        decades = (decades + 4.0).min(cfg.max_decades);
    }
}

struct BoundNode {
    point: C64,
    arc: f64,
    a: C64,
    da: C64,
    decade: usize,
}

fn bound_integrals_on(model: &Model, gs: &[KeyholeContour], cfg: &BoundConfig, n_bins: usize, exec: Execution) -> Result<BoundIntegrals> {
    let p = model.p() as i32;
    let lambda = model.lambda();
    let dir = lambda / lambda.norm();
    let base = gs.iter().map(|g| g.r).fold(f64::INFINITY, f64::min);
    let gl = GaussLegendre::new(cfg.t_nodes);
    let mut bins = vec![vec![0.0; n_bins]; 3];
    let decade_of = |z: C64| -> usize { ((z.norm() / base).log10().max(0.0) as usize).min(n_bins - 1) };
    for (tau, w) in gl.on_interval(0.0, 1.0) {
        let rho = lambda.norm() * tau.powi(4);
        let jac = 4.0 * lambda.norm() * tau.powi(3) * w;
        let t = dir * rho;
        let nodes: Vec<Vec<BoundNode>> = gs
            .iter()
            .map(|g| {
                g.nodes
                    .iter()
                    .map(|n| {
                        let (a, da) = model.fc().a_with_dt(t, n.point)?;
                        Ok(BoundNode { point: n.point, arc: n.arc_weight, a, da, decade: decade_of(n.point) })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let (u_nodes, v1_nodes, v2_nodes) = (&nodes[0], &nodes[1], &nodes[2]);
        // ψ integrals: I2 with decays (3/2, 1), I3 with (1, 3/2).
        for d1 in v1_nodes {
            for d2 in v2_nodes {
                let diff = d1.point - d2.point;
                let inner = d2.a.powi(p - 1) + t * d2.da * d2.a.powi(p - 2) * (p - 1) as f64;
                let psi = (2.0 / diff * d1.a * inner).norm() * d1.arc * d2.arc * jac;
                let m1 = 1.0 + d1.point.norm();
                let m2 = 1.0 + d2.point.norm();
                let bin = d1.decade.max(d2.decade);
                bins[1][bin] += psi * m1.powf(-1.5) / m2;
                bins[2][bin] += psi / m1 * m2.powf(-1.5);
            }
        }
        if p > 2 {
            // |Σ_k ∂_t(t a^k a^{p-1-k})| does not depend on u; tabulate it once per t.
            let sums: Vec<f64> = v1_nodes
                .iter()
                .flat_map(|d1| v2_nodes.iter().map(move |d2| phi_sum(p, t, (d1.a, d1.da), (d2.a, d2.da)).norm()))
                .collect();
            let decay2: Vec<f64> = v2_nodes.iter().map(|d2| d2.arc / (1.0 + d2.point.norm())).collect();
            let n2 = v2_nodes.len();
            let rows = exec.map(u_nodes.len(), |iu| {
                let du = &u_nodes[iu];
                let mut row = vec![0.0; n_bins];
                let g2: Vec<f64> = v2_nodes
                    .iter()
                    .zip(&decay2)
                    .map(|(d2, w2)| w2 / (d2.point - du.point).norm())
                    .collect();
                for (i1, d1) in v1_nodes.iter().enumerate() {
                    let e1 = du.a.norm() * du.arc * d1.arc * (1.0 + d1.point.norm()).powf(-1.5) / (d1.point - du.point).norm();
                    let b1 = du.decade.max(d1.decade);
                    let srow = &sums[i1 * n2..(i1 + 1) * n2];
                    for ((d2, s), g) in v2_nodes.iter().zip(srow).zip(&g2) {
                        row[b1.max(d2.decade)] += e1 * s * g;
                    }
                }
                row
            });
            for row in rows {
                for (b, v) in row.into_iter().enumerate() {
                    bins[0][b] += v * jac;
                }
            }
        }
    }
    let mut out = [(0.0, 0.0); 3];
    for j in 0..3 {
        out[j] = with_tail(&bins[j]).ok_or_else(|| {
            LvrError::QuadratureFailure(format!("bound integral I{} does not decay with the truncation radius", j + 1))
        })?;
    }
    Ok(BoundIntegrals {
        i1: out[0].0,
        i2: out[1].0,
        i3: out[2].0,
        tails: [out[0].1, out[1].1, out[2].1],
        r_trunc: 0.0,
        contour_r: [0.0; 3],
        contour_psi: [0.0; 3],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn keyhole_basic_integrals() {
        let g = make_keyhole(0.1, 5.0, 0.3, 64).unwrap();
        assert!((g.winding(c(2.55, 0.0)) - 1.0).norm() < 1e-10);
        assert!(g.winding(c(-5.0, 0.0)).norm() < 1e-10);
        assert!(g.integrate(|w| w).norm() < 1e-10);
        assert!(g.closure_gap() < 1e-12);
        assert!((g.winding(c(0.0, 0.0)) - 1.0).norm() < 1e-10);
        assert!(make_keyhole(1.0, 0.5, 0.3, 64).is_err());
        assert!(make_keyhole(0.1, 5.0, 1.6, 64).is_err());
    }

    #[test]
    fn cauchy_reconstructs_a() {
        let spec = Spectrum::new(vec![1.0, 2.5]).unwrap();
        let g = make_keyhole(0.2, 4.0, 0.5, 128).unwrap();
        let m0 = Model::new(ModelParams::square(2, c(0.0, 0.0), 2).unwrap()).unwrap();
        let got = cauchy_reconstruct_a(&m0, &spec, &g).unwrap();
        assert!((got[0] - 1.0).norm() < 1e-10 && (got[1] - 2.5).norm() < 1e-10);

        let m = Model::new(ModelParams::square(2, c(0.1, 0.0), 2).unwrap()).unwrap();
        let got = cauchy_reconstruct_a(&m, &spec, &g).unwrap();
        let want = m.matrix_a(&spec).unwrap();
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).norm() / y.norm() < 1e-6);
        }

        let lam = C64::from_polar(0.05, PI / 3.0);
        let m = Model::new(ModelParams::square(3, lam, 1).unwrap()).unwrap();
        let spec = Spectrum::new(vec![0.5]).unwrap();
        let g = make_keyhole(0.3, 1.5, 0.4, 128).unwrap();
        let got = cauchy_reconstruct_a(&m, &spec, &g).unwrap()[0];
        let want = m.matrix_a(&spec).unwrap()[0];
        assert!((got - want).norm() / want.norm() < 1e-6);
    }

    #[test]
    fn phi_vanishes_for_p2_and_reduces_at_t0() {
        let m = Model::new(ModelParams::square(2, c(0.1, 0.0), 1).unwrap()).unwrap();
        assert_eq!(weight_phi(&m, c(0.05, 0.0), c(1.0, 0.0), c(2.0, 0.1), c(3.0, -0.1)).unwrap(), c(0.0, 0.0));

        let m = Model::new(ModelParams::square(4, c(0.1, 0.0), 1).unwrap()).unwrap();
        let (u, v1, v2) = (c(1.0, 0.2), c(2.0, 0.3), c(3.0, -0.4));
        let got = weight_phi(&m, c(0.0, 0.0), u, v1, v2).unwrap();
        let closed: C64 = (1..=2).map(|k| v1.powi(k) * v2.powi(3 - k)).sum();
        let want = -u / ((v1 - u) * (v2 - u)) * closed;
        assert!((got - want).norm() < 1e-13);
    }

    #[test]
    fn product_rule_matches_difference() {
        let m = Model::new(ModelParams::square(3, c(0.1, 0.0), 1).unwrap()).unwrap();
        let fc = m.fc();
        let (v1, v2) = (C64::from_polar(2.0, 0.2), C64::from_polar(3.0, -0.2));
        let t = c(0.05, 0.0);
        let f = |t: C64| t * fc.a_eval(t, v1).unwrap() * fc.a_eval(t, v2).unwrap();
        let h = 1e-6;
        let fd = (f(t + h) - f(t - h)) / (2.0 * h);
        let pr = dt_product(t, 1, 1, fc.a_with_dt(t, v1).unwrap(), fc.a_with_dt(t, v2).unwrap());
        assert!((fd - pr).norm() / pr.norm() < 1e-5);
    }

    #[test]
    fn phi_exchange_symmetry() {
        // Swapping v1 and v2 maps the k-term onto the (p-1-k)-term.
        let m = Model::new(ModelParams::square(5, C64::from_polar(0.05, 0.4), 1).unwrap()).unwrap();
        let (t, u, v1, v2) = (C64::from_polar(0.03, 0.4), c(0.7, 0.1), c(1.5, 0.2), c(2.2, -0.3));
        let a = weight_phi(&m, t, u, v1, v2).unwrap();
        let b = weight_phi(&m, t, u, v2, v1).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn psi_collision_guard() {
        let m = Model::new(ModelParams::square(3, c(0.1, 0.0), 1).unwrap()).unwrap();
        let v = c(1.0, 0.5);
        assert!(matches!(weight_psi(&m, c(0.05, 0.0), v, v + 1e-12), Err(LvrError::NearCollision(_))));
    }

    #[test]
    fn triple_nesting_is_enforced() {
        let a = make_keyhole(0.3, 4.0, 0.5, 64).unwrap();
        let b = make_keyhole(0.2, 3.0, 0.4, 64).unwrap();
        let cc = make_keyhole(0.1, 2.0, 0.3, 64).unwrap();
        assert!(ContourTriple::new(a.clone(), b.clone(), cc.clone()).is_ok());
        assert!(ContourTriple::new(cc, b, a).is_err());
    }

    #[test]
    fn reconstruct_s_scalar_p2() {
        let params = ModelParams::square(2, c(0.1, 0.0), 1).unwrap();
        let m = Model::new(params).unwrap();
        let spec = Spectrum::new(vec![1.0]).unwrap();
        let rep = verify_reconstruct_s(&m, &spec, 1e-5, Execution::Sequential).unwrap();
        let a = m.matrix_a(&spec).unwrap()[0];
        assert!((rep.spectral_value - -(1.0 + 0.2 * a).ln()).norm() < 1e-14);
        assert!(rep.rel_error < 1e-5);
        let zero = m.at_lambda(c(0.0, 0.0));
        let triple = ContourTriple::for_spectrum(&spec, &params, 64).unwrap();
        assert_eq!(reconstruct_s(&zero, &spec, &triple, 8, Execution::Sequential).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn cut_sector_audit_examples() {
        let pac = crate::lvr_action::Pacman::new(0.5, 0.1).unwrap();
        let params = ModelParams::square(2, C64::from_polar(0.09, PI - 0.6), 1).unwrap().with_pacman(pac);
        let good = make_keyhole(0.1, 5.0, 0.2, 128).unwrap();
        assert!(cut_sector_audit(&params, &good, 400).unwrap().pass);
        let real = params.with_lambda(c(0.05, 0.0));
        assert!(cut_sector_audit(&real, &good, 400).unwrap().pass);
        let edge = params.with_lambda(C64::from_polar(0.09, PI - 0.51));
        let bad = make_keyhole(0.1, 5.0, 0.5, 64).unwrap();
        let rep = cut_sector_audit(&edge, &bad, 400).unwrap();
        assert!(!rep.pass && rep.violations > 0);
    }

    #[test]
    fn bound_integrals_p2_has_no_phi_term() {
        let params = ModelParams::square(2, c(0.05, 0.0), 1).unwrap();
        let b = bound_integrals(&params, &BoundConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(b.i1, 0.0);
        assert!(b.i2.is_finite() && b.i2 > 0.0 && b.i3.is_finite() && b.i3 > 0.0);
    }
}
