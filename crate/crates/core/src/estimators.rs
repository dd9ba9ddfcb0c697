//! A posteriori estimators: anisotropic space estimators, the time-error
//! terms, energy norms and effectivity indices.

use crate::bdf2::{time_coefficients, TimeHistory, Var};
use crate::error::{Error, Result};
use crate::fem::{boundary_jump_norms, edge_jumps_from_gradients, omega, recovery_matrices, BoundaryFlux, MeshData};
use crate::mesh::{Mesh, Point};
use crate::models::{IonicModel, ScalarReaction};
use crate::quadrature::{gauss_legendre, TriangleRule};

/// Quadrature and normalization settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorOptions {
    /// Gauss–Legendre points per step.
    pub time_points: usize,
    /// Polynomial degree of the triangle rule.
    pub space_degree: usize,
    /// Uniform subdivisions of the triangle rule.
    pub subdivisions: usize,
    /// Lower bound on `|u_h(t)|₁` in the energy norm.
    pub norm_floor: Option<f64>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self { time_points: 3, space_degree: 5, subdivisions: 0, norm_floor: None }
    }
}

impl EstimatorOptions {
    fn rules(&self) -> Result<(Vec<(f64, f64)>, TriangleRule)> {
        Ok((gauss_legendre(self.time_points)?, TriangleRule::for_degree(self.space_degree)?.subdivided(self.subdivisions)))
    }
}

/// Data of `∂u/∂t − div(A∇u) + f(u) = g` with `A∇u·n = g_N` on the boundary.
#[derive(Clone, Copy)]
pub struct ScalarProblem<'a> {
    pub reaction: ScalarReaction,
    /// `A` frozen on each element.
    pub diffusion: &'a [f64],
    pub source: Option<&'a dyn Fn(Point, f64) -> f64>,
    pub flux: Option<BoundaryFlux<'a>>,
}

/// Per-element and global space estimator of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceEstimate {
    pub per_element: Vec<f64>,
    /// The estimator with the element residual dropped.
    pub edge_part: Vec<f64>,
    pub global: f64,
}

impl SpaceEstimate {
    fn from_squares(sq: Vec<f64>, edge_sq: Vec<f64>) -> Self {
        let global = sq.iter().sum::<f64>().sqrt();
        Self { per_element: sq.iter().map(|v| v.sqrt()).collect(), edge_part: edge_sq.iter().map(|v| v.sqrt()).collect(), global }
    }
}

/// `ω^{S,W}` of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaEstimate {
    /// `ω_K(w̃)` at the time where the global value peaks.
    pub per_element: Vec<f64>,
    pub global: f64,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TimeTerms {
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eta4: f64,
    pub total: f64,
    /// Without the third-difference term.
    pub modified: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MonodomainTimeTerms {
    pub eta1_u: f64,
    pub eta3_u: f64,
    pub eta4_u: f64,
    pub eta3_w: f64,
    pub eta4_w: f64,
    pub total_u: f64,
    pub total_w: f64,
    pub modified_u: f64,
    pub modified_w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TimeReport {
    Scalar(TimeTerms),
    Monodomain(MonodomainTimeTerms),
}

/// Everything estimated for one accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub elements: usize,
    /// `η^S` (scalar) or `η^{S,U}` (monodomain).
    pub space: SpaceEstimate,
    pub omega_w: Option<OmegaEstimate>,
    /// `None` before three steps exist.
    pub time: Option<TimeReport>,
    pub norm_u: f64,
    pub norm_w: Option<f64>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / b
    }
}

impl EstimatorReport {
    pub fn space_rel(&self) -> f64 {
        ratio(self.space.global, self.norm_u)
    }

    pub fn omega_rel(&self) -> Option<f64> {
        Some(ratio(self.omega_w.as_ref()?.global, self.norm_w?))
    }

    /// Relative modified time estimators: one value (scalar) or `(u, w)`.
    pub fn time_rel(&self) -> Vec<f64> {
        match &self.time {
            None => Vec::new(),
            Some(TimeReport::Scalar(t)) => vec![ratio(t.modified, self.norm_u)],
            Some(TimeReport::Monodomain(t)) => {
                vec![ratio(t.modified_u, self.norm_u), ratio(t.modified_w, self.norm_w.unwrap_or(0.0))]
            }
        }
    }
}

/// `(u_lin, ũ, ∂ũ/∂t)` at `t`, falling back to the linear interpolant when
/// only two levels exist.
fn states(history: &TimeHistory, var: Var, t: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if history.len() >= 3 {
        return history.reconstructions(var, t);
    }
    let d1 = history.divided_difference(var, 1)?;
    let un = history.level(0).get(var);
    let tn = history.t(0);
    let lin: Vec<f64> = un.iter().zip(&d1).map(|(u, d)| u + (t - tn) * d).collect();
    Ok((lin.clone(), lin, d1))
}

/// The discrete time derivative of the step: Gear with three levels,
/// backward Euler with two.
fn step_derivative(history: &TimeHistory, var: Var) -> Result<Vec<f64>> {
    if history.len() >= 3 {
        history.gear_derivative(var)
    } else {
        history.divided_difference(var, 1)
    }
}

fn at(t: &[usize; 3], b: &[f64; 3], v: &[f64]) -> f64 {
    b[0] * v[t[0]] + b[1] * v[t[1]] + b[2] * v[t[2]]
}

fn point(mesh: &Mesh, t: &[usize; 3], b: &[f64; 3]) -> Point {
    let v = mesh.vertices();
    let x = b[0] * v[t[0]][0] + b[1] * v[t[1]][0] + b[2] * v[t[2]][0];
    let y = b[0] * v[t[0]][1] + b[1] * v[t[1]][1] + b[2] * v[t[2]][1];
    [x, y]
}

/// `Σ_K |K| |∇v|²`.
pub fn h1_seminorm_sq(mesh: &Mesh, data: &MeshData, v: &[f64]) -> f64 {
    (0..mesh.num_triangles())
        .map(|k| {
            let g = data.gradient(mesh, k, v);
            data.area[k] * (g[0] * g[0] + g[1] * g[1])
        })
        .sum()
}

/// Exact `‖v‖²_K` of a P1 field.
pub fn element_l2_sq(mesh: &Mesh, data: &MeshData, k: usize, v: &[f64]) -> f64 {
    let t = mesh.triangles()[k];
    let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
    let s = a + b + c;
    data.area[k] / 12.0 * (a * a + b * b + c * c + s * s)
}

pub fn l2_sq(mesh: &Mesh, data: &MeshData, v: &[f64]) -> f64 {
    (0..mesh.num_triangles()).map(|k| element_l2_sq(mesh, data, k, v)).sum()
}

fn check(mesh: &Mesh, data: &MeshData, history: &TimeHistory, levels: usize) -> Result<()> {
    data.check(mesh)?;
    if history.generation != mesh.generation() {
        return Err(Error::Stale { field: history.generation, mesh: mesh.generation() });
    }
    if history.len() < levels {
        return Err(Error::History { needed: levels, available: history.len() });
    }
    Ok(())
}

/// `(h_K / (λ1 λ2))^{1/2}`.
fn edge_weight(data: &MeshData, k: usize) -> f64 {
    let f = &data.frames[k];
    (f.h / (f.lambda1 * f.lambda2)).sqrt()
}

/// `η^S_{K,n}`: element residual `f(ũ) − g + ∂u`, flux jumps of `u_lin`,
/// weighted by `ω_K(ũ)` and integrated in time.
pub fn space_estimator_scalar(
    mesh: &Mesh,
    data: &MeshData,
    history: &TimeHistory,
    problem: &ScalarProblem<'_>,
    opts: &EstimatorOptions,
) -> Result<SpaceEstimate> {
    check(mesh, data, history, 2)?;
    let (times, rule) = opts.rules()?;
    let (tn, tau) = (history.t(0), history.tau(0));
    let nt = mesh.num_triangles();
    let du = step_derivative(history, Var::U)?;
    let mut sq = vec![0.0; nt];
    let mut edge_sq = vec![0.0; nt];
    for &(s, wt) in &times {
        let t = tn - tau + s * tau;
        let (lin, quad, _) = states(history, Var::U, t)?;
        let g = recovery_matrices(mesh, data, &quad);
        let grads = data.gradients(mesh, &lin);
        let jumps = edge_jumps_from_gradients(mesh, data, &grads, problem.diffusion, problem.flux);
        let jn = boundary_jump_norms(data, &jumps);
        for (k, tri) in mesh.triangles().iter().enumerate() {
            let mut r2 = 0.0;
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let mut r = problem.reaction.value(at(tri, b, &quad)) + at(tri, b, &du);
                if let Some(src) = problem.source {
                    r -= src(point(mesh, tri, b), t);
                }
                r2 += w * r * r;
            }
            let res = (r2 * data.area[k]).sqrt();
            let edge = 0.5 * edge_weight(data, k) * jn[k].sqrt();
            let om = omega(&data.frames[k], &g[k]);
            sq[k] += wt * tau * (res + edge) * om;
            edge_sq[k] += wt * tau * edge * om;
        }
    }
    Ok(SpaceEstimate::from_squares(sq, edge_sq))
}

/// `∫ ‖a(t) − I₁a(t)‖² dt` where `a(x, t) = value(ũ(x, t), w̃(x, t))` and
/// `I₁a` interpolates `a` linearly in time between the two end levels,
/// pointwise in space.
fn interpolation_defect(
    mesh: &Mesh,
    data: &MeshData,
    history: &TimeHistory,
    with_w: bool,
    value: &dyn Fn(f64, f64) -> f64,
    times: &[(f64, f64)],
    rule: &TriangleRule,
) -> Result<f64> {
    let (tn, tau) = (history.t(0), history.tau(0));
    let (un, um) = (history.level(0).get(Var::U), history.level(1).get(Var::U));
    let (wn, wm) = if with_w {
        (history.level(0).get(Var::W), history.level(1).get(Var::W))
    } else {
        (un, um)
    };
    let mut total = 0.0;
    for &(s, wt) in times {
        let t = tn - tau + s * tau;
        let (_, uq, _) = states(history, Var::U, t)?;
        let wq = if with_w { states(history, Var::W, t)?.1 } else { uq.clone() };
        let mut acc = 0.0;
        for (k, tri) in mesh.triangles().iter().enumerate() {
            let mut e2 = 0.0;
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let a = value(at(tri, b, &uq), at(tri, b, &wq));
                let an = value(at(tri, b, un), at(tri, b, wn));
                let am = value(at(tri, b, um), at(tri, b, wm));
                let d = a - ((1.0 - s) * am + s * an);
                e2 += w * d * d;
            }
            acc += e2 * data.area[k];
        }
        total += wt * tau * acc;
    }
    Ok(total)
}

/// `p_n`, `∂²u`, `∂³u` for the newest step.
fn differences(history: &TimeHistory, var: Var) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (_, p) = time_coefficients(history.tau(0), history.tau(1), history.tau(2), 0.0);
    Ok((p, history.divided_difference(var, 2)?, history.divided_difference(var, 3)?))
}

/// The four time-error terms of the newest step (needs four levels).
pub fn time_estimator_terms(
    mesh: &Mesh,
    data: &MeshData,
    history: &TimeHistory,
    reaction: &ScalarReaction,
    opts: &EstimatorOptions,
) -> Result<TimeTerms> {
    check(mesh, data, history, 4)?;
    let (times, rule) = opts.rules()?;
    let tau = history.tau(0);
    let (p, d2, d3) = differences(history, Var::U)?;
    let eta1 = (tau.powi(5) / 120.0 * h1_seminorm_sq(mesh, data, &d2)).sqrt();
    let e2: f64 = (0..mesh.num_triangles())
        .map(|k| data.frames[k].lambda2.powi(2) * element_l2_sq(mesh, data, k, &d2))
        .sum();
    let eta2 = (tau.powi(3) / 12.0 * e2).sqrt();
    let eta3 = (p * l2_sq(mesh, data, &d3)).sqrt();
    let f = |u: f64, _: f64| reaction.value(u);
    let eta4 = interpolation_defect(mesh, data, history, false, &f, &times, &rule)?.sqrt();
    Ok(TimeTerms {
        eta1,
        eta2,
        eta3,
        eta4,
        total: (eta1 * eta1 + eta2 * eta2 + eta3 * eta3 + eta4 * eta4).sqrt(),
        modified: (eta1 * eta1 + eta2 * eta2 + eta4 * eta4).sqrt(),
    })
}

/// `η^{S,U}` (residual `∂ũ/∂t + F(ũ, w̃)`, jumps of `D∇u_lin`) and
/// `ω^{S,W}` (peak over the quadrature times).
pub fn monodomain_space_estimators(
    mesh: &Mesh,
    data: &MeshData,
    history: &TimeHistory,
    model: &IonicModel,
    diffusion: f64,
    opts: &EstimatorOptions,
) -> Result<(SpaceEstimate, OmegaEstimate)> {
    check(mesh, data, history, 2)?;
    let (times, rule) = opts.rules()?;
    let (tn, tau) = (history.t(0), history.tau(0));
    let nt = mesh.num_triangles();
    let dvec = vec![diffusion; nt];
    let mut sq = vec![0.0; nt];
    let mut edge_sq = vec![0.0; nt];
    let mut best = OmegaEstimate { per_element: vec![0.0; nt], global: -1.0, time: tn };
    for &(s, wt) in &times {
        let t = tn - tau + s * tau;
        let (lin, uq, duq) = states(history, Var::U, t)?;
        let (_, wq, _) = states(history, Var::W, t)?;
        let g = recovery_matrices(mesh, data, &uq);
        let gw = recovery_matrices(mesh, data, &wq);
        let grads = data.gradients(mesh, &lin);
        let jn = boundary_jump_norms(data, &edge_jumps_from_gradients(mesh, data, &grads, &dvec, None));
        let mut om_w = Vec::with_capacity(nt);
        for (k, tri) in mesh.triangles().iter().enumerate() {
            let mut r2 = 0.0;
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let r = at(tri, b, &duq) + model.eval(at(tri, b, &uq), at(tri, b, &wq)).f;
                r2 += w * r * r;
            }
            let res = (r2 * data.area[k]).sqrt();
            let edge = edge_weight(data, k) * jn[k].sqrt();
            let om = omega(&data.frames[k], &g[k]);
            sq[k] += wt * tau * (res + edge) * om;
            edge_sq[k] += wt * tau * edge * om;
            om_w.push(omega(&data.frames[k], &gw[k]));
        }
        let global = om_w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if global > best.global {
            best = OmegaEstimate { per_element: om_w, global, time: t };
        }
    }
    Ok((SpaceEstimate::from_squares(sq, edge_sq), best))
}

/// Time terms for `u` (with `F`) and `w` (with `G`); needs four levels.
pub fn monodomain_time_estimators(
    mesh: &Mesh,
    data: &MeshData,
    history: &TimeHistory,
    model: &IonicModel,
    opts: &EstimatorOptions,
) -> Result<MonodomainTimeTerms> {
    check(mesh, data, history, 4)?;
    let (times, rule) = opts.rules()?;
    let tau = history.tau(0);
    let (p, d2u, d3u) = differences(history, Var::U)?;
    let (_, _, d3w) = differences(history, Var::W)?;
    let eta1_u = (tau.powi(5) / 120.0 * h1_seminorm_sq(mesh, data, &d2u)).sqrt();
    let eta3_u = (p * l2_sq(mesh, data, &d3u)).sqrt();
    let eta3_w = (p * l2_sq(mesh, data, &d3w)).sqrt();
    let f = |u: f64, w: f64| model.eval(u, w).f;
    let g = |u: f64, w: f64| model.eval(u, w).g;
    let eta4_u = interpolation_defect(mesh, data, history, true, &f, &times, &rule)?.sqrt();
    let eta4_w = interpolation_defect(mesh, data, history, true, &g, &times, &rule)?.sqrt();
    Ok(MonodomainTimeTerms {
        eta1_u,
        eta3_u,
        eta4_u,
        eta3_w,
        eta4_w,
        total_u: (eta1_u * eta1_u + eta3_u * eta3_u + eta4_u * eta4_u).sqrt(),
        total_w: (eta3_w * eta3_w + eta4_w * eta4_w).sqrt(),
        modified_u: (eta1_u * eta1_u + eta4_u * eta4_u).sqrt(),
        modified_w: eta4_w,
    })
}

/// `(∫ |v_lin(t)|₁² dt)^{1/2}` over the newest step, with `|v|₁` floored
/// when configured.
pub fn energy_norm_interval(mesh: &Mesh, data: &MeshData, history: &TimeHistory, var: Var, opts: &EstimatorOptions) -> Result<f64> {
    check(mesh, data, history, 2)?;
    let times = gauss_legendre(opts.time_points)?;
    let (tn, tau) = (history.t(0), history.tau(0));
    let d1 = history.divided_difference(var, 1)?;
    let un = history.level(0).get(var);
    let mut total = 0.0;
    for &(s, wt) in &times {
        let t = tn - tau + s * tau;
        let lin: Vec<f64> = un.iter().zip(&d1).map(|(u, d)| u + (t - tn) * d).collect();
        let mut n = h1_seminorm_sq(mesh, data, &lin).sqrt();
        if let Some(floor) = opts.norm_floor {
            n = n.max(floor);
        }
        total += wt * tau * n * n;
    }
    Ok(total.sqrt())
}

/// Full estimator report of the newest step. Time terms are included once
/// four levels are stored.
pub fn scalar_report(
    mesh: &Mesh,
    data: &MeshData,
    history: &TimeHistory,
    problem: &ScalarProblem<'_>,
    opts: &EstimatorOptions,
) -> Result<EstimatorReport> {
    let space = space_estimator_scalar(mesh, data, history, problem, opts)?;
    let time = if history.len() >= 4 {
        Some(TimeReport::Scalar(time_estimator_terms(mesh, data, history, &problem.reaction, opts)?))
    } else {
        None
    };
    Ok(EstimatorReport {
        step: history.n,
        t: history.t(0),
        tau: history.tau(0),
        elements: mesh.num_triangles(),
        space,
        omega_w: None,
        time,
        norm_u: energy_norm_interval(mesh, data, history, Var::U, opts)?,
        norm_w: None,
    })
}

/// Monodomain counterpart of [`scalar_report`]; `w_floor` overrides the
/// norm floor for the recovery variable.
pub fn monodomain_report(
    mesh: &Mesh,
    data: &MeshData,
    history: &TimeHistory,
    model: &IonicModel,
    diffusion: f64,
    opts: &EstimatorOptions,
    w_floor: Option<f64>,
) -> Result<EstimatorReport> {
    let (space, om) = monodomain_space_estimators(mesh, data, history, model, diffusion, opts)?;
    let time = if history.len() >= 4 {
        Some(TimeReport::Monodomain(monodomain_time_estimators(mesh, data, history, model, opts)?))
    } else {
        None
    };
    let wopts = EstimatorOptions { norm_floor: w_floor, ..*opts };
    Ok(EstimatorReport {
        step: history.n,
        t: history.t(0),
        tau: history.tau(0),
        elements: mesh.num_triangles(),
        space,
        omega_w: Some(om),
        time,
        norm_u: energy_norm_interval(mesh, data, history, Var::U, opts)?,
        norm_w: Some(energy_norm_interval(mesh, data, history, Var::W, &wopts)?),
    })
}

/// Run totals `η^S = (Σ_n (η^S_n)²)^{1/2}` and `η^T = (Σ_{n≥3} (η^T_n)²)^{1/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct GlobalEstimates {
    pub eta_s_sq: f64,
    pub eta_t_sq: f64,
    pub eta_t_modified_sq: f64,
    /// `Σ_n τ_n (ω^{S,W}_n)²`, an L²-in-time total.
    pub omega_w_sq: f64,
}

impl GlobalEstimates {
    pub fn add(&mut self, report: &EstimatorReport) {
        self.eta_s_sq += report.space.global.powi(2);
        match &report.time {
            Some(TimeReport::Scalar(t)) => {
                self.eta_t_sq += t.total.powi(2);
                self.eta_t_modified_sq += t.modified.powi(2);
            }
            Some(TimeReport::Monodomain(t)) => {
                self.eta_t_sq += t.total_u.powi(2);
                self.eta_t_modified_sq += t.modified_u.powi(2);
            }
            None => {}
        }
        if let Some(om) = &report.omega_w {
            self.omega_w_sq += report.tau * om.global.powi(2);
        }
    }

    pub fn eta_s(&self) -> f64 {
        self.eta_s_sq.sqrt()
    }

    pub fn eta_t(&self) -> f64 {
        self.eta_t_sq.sqrt()
    }
}

/// Reference error norms: `⫴e_u⫴` and optionally `‖e_w‖_{L²(0,T;L²)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceErrors {
    pub energy: f64,
    pub w_l2: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectivityIndices {
    pub ei: f64,
    pub ei_s: f64,
    pub ei_t: f64,
    pub ei_sw: Option<f64>,
}

/// `ei = ((η^S)² + (η^T)²)^{1/2} / ⫴e⫴`, `ei^S`, `ei^T`, and `ei^{S,W}` when
/// `w` data is present.
pub fn effectivity_indices(eta_s: f64, eta_t: f64, omega_w: Option<f64>, err: &ReferenceErrors) -> Result<EffectivityIndices> {
    if !(err.energy > 0.0) {
        return Err(Error::UndefinedIndex(err.energy));
    }
    let ei_sw = match (omega_w, err.w_l2) {
        (Some(om), Some(e)) if e > 0.0 => Some(om / e),
        (Some(_), Some(e)) => return Err(Error::UndefinedIndex(e)),
        _ => None,
    };
    Ok(EffectivityIndices {
        ei: (eta_s * eta_s + eta_t * eta_t).sqrt() / err.energy,
        ei_s: eta_s / err.energy,
        ei_t: eta_t / err.energy,
        ei_sw,
    })
}
