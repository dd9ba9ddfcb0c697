//! Variable-step BDF2: divided differences, the Gear derivative, Newton
//! polynomial reconstructions, the nonlinear step solves and the step-size
//! controller.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::{self, CsrMatrix, SpdSolver};
use crate::models::{IonicModel, ScalarReaction};

/// One stored time level.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub t: f64,
    pub u: Vec<f64>,
    /// Recovery variable for the monodomain model.
    pub w: Option<Vec<f64>>,
}

/// Which field of a level to read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    U,
    W,
}

impl Level {
    pub fn get(&self, var: Var) -> &[f64] {
        match var {
            Var::U => &self.u,
            Var::W => self.w.as_deref().expect("level has no recovery variable"),
        }
    }
}

/// The most recent time levels on one mesh, newest first.
#[derive(Clone, Debug)]
pub struct TimeHistory {
    levels: VecDeque<Level>,
    capacity: usize,
    /// Step index of the newest level (0 for the initial value).
    pub n: usize,
    pub generation: u64,
}

impl TimeHistory {
    pub fn new(initial: Level, generation: u64, capacity: usize) -> Self {
        let mut levels = VecDeque::with_capacity(capacity);
        levels.push_front(initial);
        Self { levels, capacity: capacity.max(4), n: 0, generation }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Level `j` steps back from the newest.
    pub fn level(&self, j: usize) -> &Level {
        &self.levels[j]
    }

    pub fn levels(&self) -> impl Iterator<Item = &Level> {
        self.levels.iter()
    }

    pub fn newest(&self) -> &Level {
        &self.levels[0]
    }

    pub fn t(&self, j: usize) -> f64 {
        self.levels[j].t
    }

    /// `τ_{n−j} = t_{n−j} − t_{n−j−1}`.
    pub fn tau(&self, j: usize) -> f64 {
        self.levels[j].t - self.levels[j + 1].t
    }

    /// `γ_n = τ_n / τ_{n−1}`.
    pub fn gamma(&self) -> Option<f64> {
        (self.len() >= 3).then(|| self.tau(0) / self.tau(1))
    }

    pub fn push(&mut self, level: Level) {
        self.levels.push_front(level);
        self.levels.truncate(self.capacity);
        self.n += 1;
    }

    /// Drops the newest level (used when a step is recomputed).
    pub fn pop(&mut self) -> Option<Level> {
        if self.levels.len() <= 1 {
            return None;
        }
        self.n -= 1;
        self.levels.pop_front()
    }

    /// Replaces every stored field, e.g. after transfer to a new mesh.
    pub fn map_fields(&mut self, generation: u64, mut f: impl FnMut(&Level) -> Result<Level>) -> Result<()> {
        let mapped: Result<VecDeque<Level>> = self.levels.iter().map(&mut f).collect();
        self.levels = mapped?;
        self.generation = generation;
        Ok(())
    }

    fn need(&self, levels: usize) -> Result<()> {
        if self.len() < levels {
            return Err(Error::History { needed: levels, available: self.len() });
        }
        Ok(())
    }

    /// `∂^k_{n−j}` of the chosen variable.
    pub fn divided_difference_at(&self, var: Var, k: usize, j: usize) -> Result<Vec<f64>> {
        self.need(j + k + 1)?;
        let mut d: Vec<Vec<f64>> = (j..=j + k).map(|i| self.levels[i].get(var).to_vec()).collect();
        for m in 1..=k {
            for i in 0..=k - m {
                let h = (self.t(j + i) - self.t(j + i + m)) / m as f64;
                let (lo, hi) = d.split_at_mut(i + 1);
                for (a, b) in lo[i].iter_mut().zip(&hi[0]) {
                    *a = (*a - b) / h;
                }
            }
            d.pop();
        }
        Ok(d.swap_remove(0))
    }

    pub fn divided_difference(&self, var: Var, k: usize) -> Result<Vec<f64>> {
        self.divided_difference_at(var, k, 0)
    }

    /// Two-step Gear derivative at `t_n`.
    pub fn gear_derivative(&self, var: Var) -> Result<Vec<f64>> {
        self.need(3)?;
        let (a, b, c) = gear_coefficients(self.tau(0), self.tau(1));
        let (u0, u1, u2) = (self.levels[0].get(var), self.levels[1].get(var), self.levels[2].get(var));
        Ok((0..u0.len()).map(|i| a * u0[i] + b * u1[i] + c * u2[i]).collect())
    }

    /// `(u_lin(t), u_quad(t), ∂u_quad/∂t(t))` on `[t_{n−1}, t_n]`.
    pub fn reconstructions(&self, var: Var, t: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.need(3)?;
        let (tn, tn1) = (self.t(0), self.t(1));
        let slack = 1e-12 * (tn - tn1);
        if !(t >= tn1 - slack && t <= tn + slack) {
            return Err(Error::Range { t, start: tn1, end: tn });
        }
        let d1 = self.divided_difference(var, 1)?;
        let d2 = self.divided_difference(var, 2)?;
        let g = self.gear_derivative(var)?;
        let un = self.levels[0].get(var);
        let q = 0.5 * (t - tn1) * (t - tn);
        let mut lin = Vec::with_capacity(un.len());
        let mut quad = Vec::with_capacity(un.len());
        let mut dq = Vec::with_capacity(un.len());
        for i in 0..un.len() {
            let l = un[i] + (t - tn) * d1[i];
            lin.push(l);
            quad.push(l + q * d2[i]);
            dq.push(g[i] + (t - tn) * d2[i]);
        }
        Ok((lin, quad, dq))
    }
}

/// Weights `(a, b, c)` with `∂^G u = a uⁿ + b uⁿ⁻¹ + c uⁿ⁻²`.
pub fn gear_coefficients(tau_n: f64, tau_nm1: f64) -> (f64, f64, f64) {
    let g = tau_n / tau_nm1;
    ((1.0 + 2.0 * g) / ((1.0 + g) * tau_n), -(1.0 + g) / tau_n, g * g / ((1.0 + g) * tau_n))
}

/// `(Q_n(t), p_n)` with `s = t − t_n`.
pub fn time_coefficients(tau_n: f64, tau_nm1: f64, tau_nm2: f64, s: f64) -> (f64, f64) {
    let sum = tau_n + tau_nm1 + tau_nm2;
    let q = tau_nm1 * sum / (6.0 * tau_n) * s;
    let p = tau_n * tau_nm1 * tau_nm1 * sum * sum / 108.0;
    (q, p)
}

/// Newton and linear-solver settings of a step solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub linear_tol: f64,
    /// Integrate the reaction with the consistent mass matrix instead of
    /// nodal quadrature.
    pub consistent_reaction: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 25, linear_tol: 1e-12, consistent_reaction: false }
    }
}

/// Convergence record of a step solve.
#[derive(Clone, Debug, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    /// Relative residual before each Newton update and after the last one.
    pub residuals: Vec<f64>,
}

/// Operators of the semi-discrete system.
#[derive(Clone, Copy, Debug)]
pub struct SystemOperators<'a> {
    pub mass: &'a CsrMatrix,
    /// `None` for a pure ODE system.
    pub stiffness: Option<&'a CsrMatrix>,
    pub lumped: &'a [f64],
    /// Cholesky with a cached analysis; `None` uses CG.
    pub solver: Option<&'a SpdSolver>,
}

fn solve_spd(ops: &SystemOperators<'_>, a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    match ops.solver {
        Some(s) => s.solve(a, b, tol),
        None => linalg::solve(a, b, tol),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Time discretisation of the new step: `∂u = c0·uⁿ + hist`.
fn step_weights(history: &TimeHistory, tau: f64, var: Var) -> (f64, Vec<f64>) {
    if history.len() >= 2 {
        let (a, b, c) = gear_coefficients(tau, history.tau(0));
        let (u1, u2) = (history.level(0).get(var), history.level(1).get(var));
        (a, u1.iter().zip(u2).map(|(x, y)| b * x + c * y).collect())
    } else {
        let u1 = history.level(0).get(var);
        (1.0 / tau, u1.iter().map(|x| -x / tau).collect())
    }
}

/// Solves one step of `M ∂u + S u + (f(u), φ) = b`: backward Euler when only
/// the initial level is stored, BDF2 otherwise.
pub fn bdf2_scalar_step(
    history: &TimeHistory,
    ops: &SystemOperators<'_>,
    reaction: &ScalarReaction,
    load: Option<&[f64]>,
    tau: f64,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, StepStats)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
    }
    let n = ops.mass.dim();
    let (c0, hist) = step_weights(history, tau, Var::U);
    let mut u = history.level(0).u.clone();
    let mut residuals = Vec::new();
    let mut f = vec![0.0; n];
    let mut df = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for it in 0..=opts.max_iter {
        for i in 0..n {
            let (v, d) = reaction.eval(u[i]);
            f[i] = v;
            df[i] = d;
        }
        let dt: Vec<f64> = (0..n).map(|i| c0 * u[i] + hist[i]).collect();
        let mut r = ops.mass.mul(&dt);
        // scale by the size of the terms, not of their (possibly cancelling) sum
        let mut scale = c0.abs() * norm(&ops.mass.mul(&u)) + norm(&ops.mass.mul(&hist));
        if let Some(s) = ops.stiffness {
            s.matvec(&u, &mut scratch);
            scale += norm(&scratch);
            r.iter_mut().zip(&scratch).for_each(|(a, b)| *a += b);
        }
        let reac: Vec<f64> = if opts.consistent_reaction {
            ops.mass.mul(&f)
        } else {
            f.iter().zip(ops.lumped).map(|(a, m)| a * m).collect()
        };
        scale += norm(&reac);
        r.iter_mut().zip(&reac).for_each(|(a, b)| *a += b);
        if let Some(b) = load {
            scale += norm(b);
            r.iter_mut().zip(b).for_each(|(a, b)| *a -= b);
        }
        let res = if scale > 0.0 { norm(&r) / scale } else { 0.0 };
        residuals.push(res);
        if !res.is_finite() {
            break;
        }
        if res <= opts.tol {
            return Ok((u, StepStats { iterations: it, residuals }));
        }
        if it == opts.max_iter {
            break;
        }
        let mut jac = match ops.stiffness {
            Some(s) => CsrMatrix::combine(c0, ops.mass, 1.0, s),
            None => CsrMatrix::combine(c0, ops.mass, 0.0, ops.mass),
        };
        let delta = if opts.consistent_reaction {
            // M·diag(f′) is not symmetric; use the direct solver
            for i in 0..n {
                let (cols, vals) = ops.mass.row(i);
                for (&j, &m) in cols.iter().zip(vals) {
                    jac.add(i, j, m * df[j]);
                }
            }
            linalg::solve_direct(&jac, &r)?
        } else {
            let d: Vec<f64> = df.iter().zip(ops.lumped).map(|(a, m)| a * m).collect();
            jac.add_diagonal(&d);
            solve_spd(ops, &jac, &r, opts.linear_tol)?
        };
        u.iter_mut().zip(&delta).for_each(|(a, d)| *a -= d);
    }
    Err(Error::NewtonDivergence { iterations: residuals.len().saturating_sub(1), residual: *residuals.last().unwrap_or(&f64::NAN) })
}

/// Solves one coupled monodomain step
/// `M ∂u + D S u + (F(u, w), φ) = 0`, `∂w + G(u, w) = 0` (the recovery
/// variable is treated pointwise at the vertices).
///
/// Newton on `(u, w)` jointly, eliminating the diagonal `w` block so each
/// iteration solves one system of vertex size.
pub fn bdf2_monodomain_step(
    history: &TimeHistory,
    ops: &SystemOperators<'_>,
    model: &IonicModel,
    diffusion: f64,
    tau: f64,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, Vec<f64>, StepStats)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
    }
    let n = ops.mass.dim();
    let (c0, hist_u) = step_weights(history, tau, Var::U);
    let (_, hist_w) = step_weights(history, tau, Var::W);
    let mut u = history.level(0).u.clone();
    let mut w = history.level(0).get(Var::W).to_vec();
    let mut residuals = Vec::new();
    let mut scratch = vec![0.0; n];
    let ml = ops.lumped;
    for it in 0..=opts.max_iter {
        let ev: Vec<_> = (0..n).map(|i| model.eval(u[i], w[i])).collect();
        let dt: Vec<f64> = (0..n).map(|i| c0 * u[i] + hist_u[i]).collect();
        let mut ru = ops.mass.mul(&dt);
        let mut scale_u = c0.abs() * norm(&ops.mass.mul(&u)) + norm(&ops.mass.mul(&hist_u));
        if let Some(s) = ops.stiffness {
            s.matvec(&u, &mut scratch);
            scratch.iter_mut().for_each(|v| *v *= diffusion);
            scale_u += norm(&scratch);
            ru.iter_mut().zip(&scratch).for_each(|(a, b)| *a += b);
        }
        let reac: Vec<f64> = (0..n).map(|i| ml[i] * ev[i].f).collect();
        scale_u += norm(&reac);
        ru.iter_mut().zip(&reac).for_each(|(a, b)| *a += b);
        // w residual, scaled by the lumped mass so both blocks are integrals
        let dtw: Vec<f64> = (0..n).map(|i| ml[i] * (c0 * w[i] + hist_w[i])).collect();
        let gw: Vec<f64> = (0..n).map(|i| ml[i] * ev[i].g).collect();
        let rw: Vec<f64> = dtw.iter().zip(&gw).map(|(a, b)| a + b).collect();
        let cw: Vec<f64> = (0..n).map(|i| ml[i] * c0 * w[i]).collect();
        let hw: Vec<f64> = (0..n).map(|i| ml[i] * hist_w[i]).collect();
        let scale_w = norm(&cw) + norm(&hw) + norm(&gw);
        let res_u = if scale_u > 0.0 { norm(&ru) / scale_u } else { 0.0 };
        let res_w = if scale_w > 0.0 { norm(&rw) / scale_w } else { 0.0 };
        let res = res_u.max(res_w);
        residuals.push(res);
        if !res.is_finite() {
            break;
        }
        if res <= opts.tol {
            return Ok((u, w, StepStats { iterations: it, residuals }));
        }
        if it == opts.max_iter {
            break;
        }
        // δw = −(r_w + m G_u δu) / (m (c0 + G_w))
        let mut jac = match ops.stiffness {
            Some(s) => CsrMatrix::combine(c0, ops.mass, diffusion, s),
            None => CsrMatrix::combine(c0, ops.mass, 0.0, ops.mass),
        };
        let mut rhs = ru.clone();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let e = &ev[i];
            let dww = c0 + e.g_w;
            diag[i] = ml[i] * (e.f_u - e.f_w * e.g_u / dww);
            rhs[i] -= e.f_w * rw[i] / dww;
        }
        jac.add_diagonal(&diag);
        let du = solve_spd(ops, &jac, &rhs, opts.linear_tol)?;
        for i in 0..n {
            let e = &ev[i];
            let dw = (rw[i] / ml[i] - e.g_u * du[i]) / (c0 + e.g_w);
            u[i] -= du[i];
            w[i] -= dw;
        }
    }
    Err(Error::NewtonDivergence { iterations: residuals.len().saturating_sub(1), residual: *residuals.last().unwrap_or(&f64::NAN) })
}

/// Controller outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepAction {
    Accept,
    Shrink,
    Grow,
    Restart,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDecision {
    pub action: StepAction,
    pub new_tau: f64,
}

/// Controller constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerConfig {
    pub shrink: f64,
    pub grow: f64,
    pub lower: f64,
    pub upper: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub restart_factor: f64,
}

impl ControllerConfig {
    pub fn scalar() -> Self {
        Self { shrink: 0.67, grow: 1.5, lower: 0.5, upper: 1.5, gamma_min: 0.4, gamma_max: 1.86, restart_factor: 0.5 }
    }

    pub fn monodomain() -> Self {
        Self { shrink: 2.0 / 3.0, grow: 1.5, ..Self::scalar() }
    }
}

/// Relative time estimator and its tolerance for one controlled variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeBand {
    pub rel: f64,
    pub tol: f64,
}

/// Decides what to do with the step just computed.
///
/// Shrinks if any variable is above `upper·TOL`, grows only if every
/// variable is below `lower·TOL`. A shrink at step 3 is turned into a
/// restart. `gamma` outside `[gamma_min, gamma_max]` forces acceptance.
pub fn step_controller(bands: &[TimeBand], tau: f64, gamma: Option<f64>, step: usize, cfg: &ControllerConfig) -> StepDecision {
    let accept = StepDecision { action: StepAction::Accept, new_tau: tau };
    if let Some(g) = gamma {
        if g < cfg.gamma_min || g > cfg.gamma_max {
            return accept;
        }
    }
    if bands.iter().any(|b| b.rel > cfg.upper * b.tol) {
        if step == 3 {
            return StepDecision { action: StepAction::Restart, new_tau: cfg.restart_factor * tau };
        }
        return StepDecision { action: StepAction::Shrink, new_tau: cfg.shrink * tau };
    }
    if !bands.is_empty() && bands.iter().all(|b| b.rel < cfg.lower * b.tol) {
        return StepDecision { action: StepAction::Grow, new_tau: cfg.grow.min(cfg.gamma_max) * tau };
    }
    accept
}
