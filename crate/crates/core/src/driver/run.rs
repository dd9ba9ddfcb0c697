//! The space-time adaptive loop.

use std::path::Path;
use std::time::Instant;

use log::{debug, info};

use super::config::{Physics, RunConfig};
use super::output::{flag, log_to_string, write_artifact, write_vtk, Action, LogRow, RunSummary};
use crate::adapt::{adapt_mesh, build_metric_field_monodomain, build_metric_field_scalar, LevelIndicators};
use crate::bdf2::{bdf2_monodomain_step, bdf2_scalar_step, step_controller, Level, StepAction, SystemOperators, TimeBand, TimeHistory};
use crate::error::{Error, Result};
use crate::estimators::{monodomain_report, scalar_report, EstimatorReport, GlobalEstimates, ScalarProblem};
use crate::fem::{assemble_operators, interpolate_nodal, recovery_matrices, transfer_fields, write_fields, MeshData, Operators};
use crate::geometry::MetricField;
use crate::linalg::SpdSolver;
use crate::mesh::{generate_uniform_mesh, read_mesh, write_mesh, Mesh, Point};
use crate::models::{DiffusionCoefficient, ScalarReaction};
use crate::quadrature::TriangleRule;

/// Levels kept per mesh: the newest four feed the estimators, two more let
/// the metric see the intervals `n−2` and `n−1` with their own history.
pub const HISTORY_CAPACITY: usize = 6;

/// Newton failures tolerated per step, each halving the step.
const NEWTON_RETRIES: usize = 8;

/// What an observer sees of an accepted step.
pub struct StepView<'a> {
    pub mesh: &'a Mesh,
    pub data: &'a MeshData,
    pub history: &'a TimeHistory,
    pub report: &'a EstimatorReport,
    pub row: &'a LogRow,
}

/// Hooks called by the loop. Errors abort the run.
pub trait Observer {
    /// Called for every accepted step.
    fn accepted(&mut self, _view: &StepView<'_>) -> Result<()> {
        Ok(())
    }

    /// The run discards everything since t = 0.
    fn restarted(&mut self) {}
}

pub struct NoObserver;

impl Observer for NoObserver {}

/// Results of a finished run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    /// Accepted rows plus one `restart` row per restart.
    pub log: Vec<LogRow>,
    pub summary: RunSummary,
    pub globals: GlobalEstimates,
    pub mesh: Mesh,
    pub history: TimeHistory,
}

/// A mesh with everything assembled on it.
pub(crate) struct Discretization {
    pub mesh: Mesh,
    pub data: MeshData,
    pub ops: Operators,
    solver: SpdSolver,
}

impl Discretization {
    pub fn new(mesh: Mesh, physics: &Physics) -> Result<Self> {
        let data = MeshData::new(&mesh)?;
        let coefficient = match physics {
            Physics::Scalar { diffusion, .. } => *diffusion,
            // the monodomain solver scales the unit stiffness itself
            Physics::Monodomain { .. } => DiffusionCoefficient::Constant(1.0),
        };
        let ops = assemble_operators(&mesh, &data, &coefficient)?;
        Ok(Self { mesh, data, ops, solver: SpdSolver::new() })
    }

    fn system(&self) -> SystemOperators<'_> {
        SystemOperators { mass: &self.ops.mass, stiffness: Some(&self.ops.stiffness), lumped: &self.data.lumped, solver: Some(&self.solver) }
    }
}

/// `u = e^{−t} cos(πx) cos(πy)`.
pub fn manufactured_solution(p: Point, t: f64) -> f64 {
    use std::f64::consts::PI;
    (-t).exp() * (PI * p[0]).cos() * (PI * p[1]).cos()
}

/// Source making [`manufactured_solution`] exact for `∂u − D Δu + f(u) = g`.
pub fn manufactured_source(reaction: &ScalarReaction, diffusion: f64, p: Point, t: f64) -> f64 {
    let u = manufactured_solution(p, t);
    (2.0 * std::f64::consts::PI * std::f64::consts::PI * diffusion - 1.0) * u + reaction.value(u)
}

/// `b_i = ∫ g φ_i` with the quintic rule.
pub fn assemble_load(mesh: &Mesh, data: &MeshData, g: impl Fn(Point) -> f64) -> Vec<f64> {
    let rule = TriangleRule::degree5();
    let mut b = vec![0.0; mesh.num_vertices()];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(k);
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let x = [0, 1].map(|d| bary[0] * p[0][d] + bary[1] * p[1][d] + bary[2] * p[2][d]);
            let v = g(x) * w * data.area[k];
            for i in 0..3 {
                b[tri[i]] += v * bary[i];
            }
        }
    }
    b
}

fn manufactured_diffusion(physics: &Physics) -> Result<Option<(ScalarReaction, f64)>> {
    match physics {
        Physics::Scalar { manufactured: true, diffusion: DiffusionCoefficient::Constant(d), reaction } => Ok(Some((*reaction, *d))),
        Physics::Scalar { manufactured: true, .. } => {
            Err(Error::Config("the manufactured source needs a constant diffusion coefficient".into()))
        }
        _ => Ok(None),
    }
}

/// Estimator report of the newest step in `history`.
pub(crate) fn step_report(cfg: &RunConfig, d: &Discretization, history: &TimeHistory) -> Result<EstimatorReport> {
    match &cfg.physics {
        Physics::Scalar { reaction, .. } => {
            let man = manufactured_diffusion(&cfg.physics)?;
            let src = man.map(|(r, dc)| move |p: Point, t: f64| manufactured_source(&r, dc, p, t));
            let problem = ScalarProblem {
                reaction: *reaction,
                diffusion: &d.ops.diffusion,
                source: src.as_ref().map(|f| f as &dyn Fn(Point, f64) -> f64),
                flux: None,
            };
            scalar_report(&d.mesh, &d.data, history, &problem, &cfg.estimator)
        }
        Physics::Monodomain { model, diffusion } => {
            monodomain_report(&d.mesh, &d.data, history, model, *diffusion, &cfg.estimator, cfg.w_norm_floor)
        }
    }
}

/// Solves the step `history.t(0) → history.t(0) + tau`.
fn solve(cfg: &RunConfig, d: &Discretization, history: &TimeHistory, tau: f64, t_new: f64) -> Result<(Level, usize)> {
    match &cfg.physics {
        Physics::Scalar { reaction, .. } => {
            let load = manufactured_diffusion(&cfg.physics)?
                .map(|(r, dc)| assemble_load(&d.mesh, &d.data, |p| manufactured_source(&r, dc, p, t_new)));
            let (u, stats) = bdf2_scalar_step(history, &d.system(), reaction, load.as_deref(), tau, &cfg.newton)?;
            Ok((Level { t: t_new, u, w: None }, stats.iterations))
        }
        Physics::Monodomain { model, diffusion } => {
            let (u, w, stats) = bdf2_monodomain_step(history, &d.system(), model, *diffusion, tau, &cfg.newton)?;
            Ok((Level { t: t_new, u, w: Some(w) }, stats.iterations))
        }
    }
}

fn with_context(step: usize, t: f64) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Step { .. } => e,
        e => Error::Step { step, t, source: Box::new(e) },
    }
}

/// Persistent scaling of the equidistribution budgets, learned from the
/// estimator achieved after each remesh.
#[derive(Clone, Copy, Debug)]
struct TargetCorrection {
    u: f64,
    w: f64,
    pending: bool,
}

impl TargetCorrection {
    const STEP: (f64, f64) = (0.25, 4.0);
    const RANGE: (f64, f64) = (0.01, 10.0);

    fn new() -> Self {
        Self { u: 1.0, w: 1.0, pending: false }
    }

    fn update(&mut self, cfg: &RunConfig, r: &EstimatorReport) {
        if !cfg.target_correction || !self.pending {
            return;
        }
        self.pending = false;
        let a = &cfg.adapt;
        let scale = |c: f64, rel: f64, tol: f64, band: (f64, f64)| {
            if !(rel > 0.0) || !tol.is_finite() {
                return c;
            }
            let f = (0.5 * (band.0 + band.1) * tol / rel).clamp(Self::STEP.0, Self::STEP.1);
            (c * f).clamp(Self::RANGE.0, Self::RANGE.1)
        };
        match &cfg.physics {
            Physics::Scalar { .. } => self.u = scale(self.u, r.space_rel(), a.tol_s, a.scalar_band),
            Physics::Monodomain { .. } => {
                self.u = scale(self.u, r.space_rel(), a.tol_s_u, a.u_band);
                self.w = scale(self.w, r.omega_rel().unwrap_or(0.0), a.tol_s_w, a.w_band);
            }
        }
        debug!("target correction u {:.4} w {:.4}", self.u, self.w);
    }
}

/// Metric from the intervals ending at the newest `levels` levels.
fn build_metric(cfg: &RunConfig, d: &Discretization, history: &TimeHistory, levels: usize, corr: &TargetCorrection) -> Result<MetricField> {
    let k = levels.min(history.len() - 1).max(1);
    let mut view = history.clone();
    let mut reports = Vec::with_capacity(k);
    for j in 0..k {
        if j > 0 {
            view.pop();
        }
        reports.push((step_report(cfg, d, &view)?, view.level(0).clone()));
    }
    let a = &cfg.adapt;
    match &cfg.physics {
        Physics::Scalar { .. } => {
            let lv: Vec<LevelIndicators> = reports
                .into_iter()
                .map(|(r, l)| LevelIndicators {
                    g: recovery_matrices(&d.mesh, &d.data, &l.u),
                    budget: corr.u * a.tol_s * r.norm_u,
                    eta: r.space.per_element,
                })
                .collect();
            build_metric_field_scalar(&d.mesh, &d.data, &lv, a)
        }
        Physics::Monodomain { .. } => {
            let us: Vec<&[f64]> = reports.iter().map(|(_, l)| &l.u[..]).collect();
            let ws: Vec<&[f64]> = reports.iter().map(|(_, l)| l.w.as_deref().expect("monodomain level")).collect();
            // quadratic mean of the element indicators over the intervals
            let nt = d.mesh.num_triangles();
            let eta: Vec<f64> = (0..nt)
                .map(|i| (reports.iter().map(|(r, _)| r.space.per_element[i].powi(2)).sum::<f64>() / k as f64).sqrt())
                .collect();
            let newest = &reports[0].0;
            let budgets = (corr.u * a.tol_s_u * newest.norm_u, corr.w * a.tol_s_w * newest.norm_w.unwrap_or(0.0));
            build_metric_field_monodomain(&d.mesh, &d.data, &us, &ws, &eta, budgets, a)
        }
    }
}

/// Moves every level of `history` onto `new`.
fn transfer_history(old: &Discretization, history: &mut TimeHistory, new: &Mesh) -> Result<()> {
    history.map_fields(new.generation(), |l| {
        let mut fs = vec![&l.u[..]];
        if let Some(w) = &l.w {
            fs.push(w);
        }
        let mut out = transfer_fields(&old.mesh, &old.data.adjacency, &fs, new)?.into_iter();
        let u = out.next().expect("u transferred");
        Ok(Level { t: l.t, u, w: out.next() })
    })
}

fn initial_mesh(cfg: &RunConfig) -> Result<Mesh> {
    match &cfg.mesh_file {
        Some(p) => read_mesh(p),
        None => generate_uniform_mesh(cfg.mesh_nx, cfg.mesh_ny, cfg.domain),
    }
}

fn initial_history(cfg: &RunConfig, mesh: &Mesh) -> Result<TimeHistory> {
    let u = interpolate_nodal(mesh, |x, y| cfg.initial.eval(x, y))?.values;
    let w = cfg.physics.is_monodomain().then(|| vec![cfg.w_initial; mesh.num_vertices()]);
    Ok(TimeHistory::new(Level { t: 0.0, u, w }, mesh.generation(), HISTORY_CAPACITY))
}

/// Whether the space estimators leave their bands: `(violated, upper)`.
fn space_violation(cfg: &RunConfig, r: &EstimatorReport) -> (bool, bool) {
    let a = &cfg.adapt;
    match &cfg.physics {
        Physics::Scalar { .. } => {
            let rel = r.space_rel();
            let hi = rel > a.scalar_band.1 * a.tol_s;
            (hi || rel < a.scalar_band.0 * a.tol_s, hi)
        }
        Physics::Monodomain { .. } => {
            let (u, w) = (r.space_rel(), r.omega_rel().unwrap_or(0.0));
            let hi = u > a.u_band.1 * a.tol_s_u || w > a.w_band.1 * a.tol_s_w;
            let lo = u < a.u_band.0 * a.tol_s_u && w < a.w_band.0 * a.tol_s_w;
            (hi || lo, hi)
        }
    }
}

fn time_bands(cfg: &RunConfig, r: &EstimatorReport) -> Vec<TimeBand> {
    let rel = r.time_rel();
    match &cfg.physics {
        Physics::Scalar { .. } => rel.into_iter().map(|rel| TimeBand { rel, tol: cfg.tol_t }).collect(),
        Physics::Monodomain { .. } => rel.into_iter().zip([cfg.tol_t_u, cfg.tol_t_w]).map(|(rel, tol)| TimeBand { rel, tol }).collect(),
    }
}

enum Attempt {
    Done(Box<RunOutput>),
    /// The controller asked for a restart; carries the violating row.
    Restart(Box<LogRow>),
}

struct Writer<'a> {
    dir: Option<&'a Path>,
    vtk_stride: usize,
    artifact_stride: usize,
}

impl Writer<'_> {
    fn step(&self, d: &Discretization, h: &TimeHistory, last: bool) -> Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let n = h.n;
        if self.vtk_stride > 0 && (n % self.vtk_stride == 0 || last) {
            let lv = h.level(0);
            let mut fields = vec![("u", &lv.u[..])];
            if let Some(w) = &lv.w {
                fields.push(("w", &w[..]));
            }
            write_vtk(&dir.join(format!("step_{n:06}.vtk")), &d.mesh, &format!("t = {}", lv.t), &fields)?;
        }
        if self.artifact_stride > 0 && n > 0 && (n % self.artifact_stride == 0 || last) {
            write_artifact(dir, &d.mesh, h)?;
        }
        Ok(())
    }
}

struct Loop<'a> {
    cfg: &'a RunConfig,
    writer: Writer<'a>,
    observer: &'a mut dyn Observer,
    corr: TargetCorrection,
    init_remeshings: usize,
}

impl Loop<'_> {
    /// Init loop: adapt the starting mesh to the first three steps, then
    /// start over from `u⁰` on it.
    fn starting_mesh(&mut self, mesh0: &Mesh, tau0: f64) -> Result<Discretization> {
        let cfg = self.cfg;
        let mut d = Discretization::new(mesh0.clone(), &cfg.physics)?;
        if !cfg.space_adaptive() {
            return Ok(d);
        }
        for it in 0..cfg.init_iterations {
            let mut h = initial_history(cfg, &d.mesh)?;
            let mut t = 0.0;
            for step in 1..=3 {
                let t_new = t + tau0;
                let (lv, _) = solve(cfg, &d, &h, tau0, t_new).map_err(with_context(step, t_new))?;
                h.push(lv);
                t = t_new;
            }
            let newest = step_report(cfg, &d, &h)?;
            if newest.space.global == 0.0 {
                break;
            }
            self.corr.update(cfg, &newest);
            let metric = build_metric(cfg, &d, &h, 3, &self.corr)?;
            let (mesh, stats) = adapt_mesh(&d.mesh, &metric, &cfg.adapt)?;
            info!("init {}: {} -> {} elements ({stats:?})", it + 1, d.mesh.num_triangles(), mesh.num_triangles());
            d = Discretization::new(mesh, &cfg.physics)?;
            self.corr.pending = true;
            self.init_remeshings += 1;
        }
        Ok(d)
    }

    /// Solves with the step halved on Newton failure.
    fn solve_retrying(&self, d: &Discretization, h: &TimeHistory, tau: f64, t_end: f64, clip: bool) -> Result<(Level, usize, f64, bool)> {
        let mut tau = tau;
        let t0 = h.t(0);
        for attempt in 0..=NEWTON_RETRIES {
            let t_new = if clip && attempt == 0 { t_end } else { t0 + tau };
            match solve(self.cfg, d, h, tau, t_new) {
                Ok((lv, it)) => return Ok((lv, it, tau, attempt > 0)),
                Err(e @ (Error::NewtonDivergence { .. } | Error::LinearSolver(_))) if attempt < NEWTON_RETRIES => {
                    debug!("step {} at t = {t_new}: {e}; halving", h.n + 1);
                    tau *= 0.5;
                }
                Err(e) => return Err(with_context(h.n + 1, t_new)(e)),
            }
        }
        unreachable!("the last retry returns")
    }

    fn attempt(&mut self, mesh0: &Mesh, tau0: f64) -> Result<Attempt> {
        let cfg = self.cfg;
        let mut d = self.starting_mesh(mesh0, tau0)?;
        let mut h = initial_history(cfg, &d.mesh)?;
        let mut log: Vec<LogRow> = Vec::new();
        let mut globals = GlobalEstimates::default();
        let mut summary = RunSummary { tau_min: f64::INFINITY, tau_max: 0.0, ..Default::default() };
        self.writer.step(&d, &h, false)?;
        let mut tau = tau0.min(cfg.tau_max);
        let end_eps = 1e-12 * cfg.t_end.max(1.0);
        while h.t(0) < cfg.t_end - end_eps {
            let clock = Instant::now();
            let t = h.t(0);
            // land on T without a sliver: the last two steps share the rest
            let rest = cfg.t_end - t;
            let (tau_try, clip) = if tau >= rest - end_eps {
                (rest, true)
            } else if 2.0 * tau > rest {
                (0.5 * rest, false)
            } else {
                (tau, false)
            };
            let (lv, mut newton, tau_step, retried) = self.solve_retrying(&d, &h, tau_try, cfg.t_end, clip)?;
            let mut tau_step = tau_step;
            let mut flags: Vec<String> = Vec::new();
            if retried {
                flags.push(flag::NEWTON_RETRY.into());
            }
            if !retried && tau_try < tau * (1.0 - 1e-12) {
                flags.push(flag::CLIPPED.into());
            }
            h.push(lv);
            let n = h.n;
            let mut report = step_report(cfg, &d, &h).map_err(with_context(n, h.t(0)))?;
            self.corr.update(cfg, &report);
            let (mut remeshes, mut shrinks) = (0usize, 0usize);
            let mut action = Action::Accept;
            let mut skip_space = false;
            // without time control a retried or shortened step does not change the plan
            let mut next_tau = if cfg.time_adaptive() { tau_step } else { tau };
            loop {
                if cfg.space_adaptive() && n >= 3 && !skip_space && report.space.global > 0.0 {
                    let (violated, upper) = space_violation(cfg, &report);
                    if violated {
                        if !upper && remeshes >= 1 {
                            flags.push(flag::BAND_EXIT.into());
                        } else if upper && remeshes >= cfg.max_remesh_per_step {
                            return Err(Error::Stagnation { step: n, relative: report.space_rel(), attempts: remeshes });
                        } else {
                            let metric = build_metric(cfg, &d, &h, 3, &self.corr)?;
                            let (mesh, stats) = adapt_mesh(&d.mesh, &metric, &cfg.adapt)?;
                            debug!("step {n}: remesh {} -> {} elements ({stats:?})", d.mesh.num_triangles(), mesh.num_triangles());
                            h.pop();
                            transfer_history(&d, &mut h, &mesh)?;
                            d = Discretization::new(mesh, &cfg.physics)?;
                            self.corr.pending = true;
                            let (lv, it) = solve(cfg, &d, &h, tau_step, t + tau_step).map_err(with_context(n, t + tau_step))?;
                            newton += it;
                            h.push(lv);
                            report = step_report(cfg, &d, &h)?;
                            self.corr.update(cfg, &report);
                            remeshes += 1;
                            continue;
                        }
                    }
                }
                if cfg.time_adaptive() && report.time.is_some() {
                    let gamma = h.gamma();
                    let ctl = &cfg.controller;
                    if gamma.is_some_and(|g| g < ctl.gamma_min || g > ctl.gamma_max) {
                        flags.push(flag::GAMMA_ESCAPE.into());
                    }
                    let dec = step_controller(&time_bands(cfg, &report), tau_step, gamma, n, ctl);
                    match dec.action {
                        StepAction::Restart => {
                            let mut row = LogRow::from_report(&report, h.level(0));
                            row.action = Action::Restart;
                            row.gamma = gamma;
                            row.remeshes = remeshes;
                            row.shrinks = shrinks;
                            row.newton = newton;
                            row.flags = flags;
                            return Ok(Attempt::Restart(Box::new(row)));
                        }
                        StepAction::Shrink if shrinks < cfg.max_shrinks_per_step => {
                            h.pop();
                            tau_step = dec.new_tau;
                            let (lv, it) = solve(cfg, &d, &h, tau_step, t + tau_step).map_err(with_context(n, t + tau_step))?;
                            newton += it;
                            h.push(lv);
                            report = step_report(cfg, &d, &h)?;
                            self.corr.update(cfg, &report);
                            shrinks += 1;
                            skip_space = true;
                            next_tau = tau_step;
                            continue;
                        }
                        StepAction::Shrink => flags.push(flag::SHRINK_CAP.into()),
                        StepAction::Grow => {
                            action = Action::Grow;
                            next_tau = dec.new_tau;
                        }
                        StepAction::Accept => {}
                    }
                }
                break;
            }
            tau = next_tau.min(cfg.tau_max);
            let mut row = LogRow::from_report(&report, h.level(0));
            row.gamma = h.gamma();
            row.remeshes = remeshes;
            row.shrinks = shrinks;
            row.newton = newton;
            row.action = action;
            row.flags = flags;
            if cfg.log_timing {
                row.wall = Some(clock.elapsed().as_secs_f64());
            }
            globals.add(&report);
            summary.steps += 1;
            summary.remeshings += remeshes;
            summary.step_adapts += shrinks + usize::from(action == Action::Grow);
            summary.rejected_solves += remeshes + shrinks;
            summary.tau_min = summary.tau_min.min(row.tau);
            summary.tau_max = summary.tau_max.max(row.tau);
            let last = h.t(0) >= cfg.t_end - end_eps;
            self.observer.accepted(&StepView { mesh: &d.mesh, data: &d.data, history: &h, report: &report, row: &row })?;
            self.writer.step(&d, &h, last)?;
            if n % 50 == 0 || last {
                info!("step {n}: t = {:.6e}, tau = {:.3e}, {} elements", row.t, row.tau, row.elements);
            }
            log.push(row);
        }
        summary.init_remeshings = self.init_remeshings;
        summary.final_t = h.t(0);
        summary.final_elements = d.mesh.num_triangles();
        summary.eta_s = globals.eta_s();
        summary.eta_t = globals.eta_t();
        summary.eta_t_modified = globals.eta_t_modified_sq.sqrt();
        summary.omega_w = cfg.physics.is_monodomain().then(|| globals.omega_w_sq.sqrt());
        Ok(Attempt::Done(Box::new(RunOutput { log, summary, globals, mesh: d.mesh, history: h })))
    }
}

/// Runs the configured problem; with `out` set, writes `log.csv`,
/// `summary.txt`, the final mesh and fields and the strided VTK files and
/// artifacts there.
pub fn run(cfg: &RunConfig, out: Option<&Path>, observer: &mut dyn Observer) -> Result<RunOutput> {
    cfg.validate()?;
    manufactured_diffusion(&cfg.physics)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let mesh0 = initial_mesh(cfg)?;
    let mut tau0 = cfg.tau0;
    let mut restart_rows: Vec<LogRow> = Vec::new();
    let mut lp = Loop {
        cfg,
        writer: Writer { dir: out, vtk_stride: cfg.vtk_stride, artifact_stride: cfg.artifact_stride },
        observer,
        corr: TargetCorrection::new(),
        init_remeshings: 0,
    };
    let mut result = loop {
        lp.init_remeshings = 0;
        match lp.attempt(&mesh0, tau0)? {
            Attempt::Done(r) => break *r,
            Attempt::Restart(row) => {
                if restart_rows.len() >= cfg.max_restarts {
                    return Err(Error::RestartLimit(restart_rows.len()));
                }
                info!("restart {}: tau0 {tau0:e} -> {:e}", restart_rows.len() + 1, tau0 * cfg.controller.restart_factor);
                tau0 *= cfg.controller.restart_factor;
                restart_rows.push(*row);
                lp.corr = TargetCorrection::new();
                lp.observer.restarted();
            }
        }
    };
    result.summary.restarts = restart_rows.len();
    restart_rows.append(&mut result.log);
    result.log = restart_rows;
    if let Some(dir) = out {
        std::fs::write(dir.join("log.csv"), log_to_string(&result.log))?;
        std::fs::write(dir.join("summary.txt"), result.summary.to_text())?;
        write_mesh(&result.mesh, &dir.join("final.mesh"))?;
        let lv = result.history.level(0);
        let mut fs = vec![&lv.u[..]];
        if let Some(w) = &lv.w {
            fs.push(w);
        }
        write_fields(&fs, &dir.join("final.fields"))?;
    }
    Ok(result)
}

/// One metric-and-remesh pass from the levels in `history` (newest first,
/// at least two), as the space loop does; returns the new mesh and the
/// levels transferred onto it.
pub fn adapt_once(cfg: &RunConfig, mesh: Mesh, history: &TimeHistory) -> Result<(Mesh, TimeHistory)> {
    cfg.validate()?;
    if history.len() < 2 {
        return Err(Error::History { needed: 2, available: history.len() });
    }
    let d = Discretization::new(mesh, &cfg.physics)?;
    let metric = build_metric(cfg, &d, history, 3, &TargetCorrection::new())?;
    let (new, stats) = adapt_mesh(&d.mesh, &metric, &cfg.adapt)?;
    debug!("adapt once: {} -> {} elements ({stats:?})", d.mesh.num_triangles(), new.num_triangles());
    let mut h = history.clone();
    transfer_history(&d, &mut h, &new)?;
    Ok((new, h))
}

/// [`run`] for a scalar configuration.
pub fn run_scalar_adaptive(cfg: &RunConfig, out: Option<&Path>, observer: &mut dyn Observer) -> Result<RunOutput> {
    if cfg.physics.is_monodomain() {
        return Err(Error::Config("run_scalar_adaptive needs a scalar problem".into()));
    }
    run(cfg, out, observer)
}

/// [`run`] for a monodomain configuration.
pub fn run_monodomain_adaptive(cfg: &RunConfig, out: Option<&Path>, observer: &mut dyn Observer) -> Result<RunOutput> {
    if !cfg.physics.is_monodomain() {
        return Err(Error::Config("run_monodomain_adaptive needs an ionic model".into()));
    }
    run(cfg, out, observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::config::{Initial, Scale, Scenario};
    use crate::models::IonicModel;

    fn custom() -> RunConfig {
        let mut c = RunConfig::preset(Scenario::Custom, Scale::Desk);
        c.mesh_nx = 4;
        c.mesh_ny = 4;
        c
    }

    #[test]
    fn load_of_one_is_the_lumped_mass() {
        let m = generate_uniform_mesh(3, 2, crate::Rect::new(0.0, 0.0, 1.0, 2.0)).unwrap();
        let d = MeshData::new(&m).unwrap();
        let b = assemble_load(&m, &d, |_| 1.0);
        for (x, y) in b.iter().zip(&d.lumped) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_state_needs_no_adaptation() {
        let mut c = custom();
        c.initial = Initial::Constant(0.5);
        c.tol_s = 0.25;
        c.tol_t = 0.2;
        c.tau_max = 0.08;
        c.sync_adapt();
        let out = run(&c, None, &mut NoObserver).unwrap();
        assert!(out.log.iter().all(|r| r.remeshes == 0 && r.eta_s == 0.0));
        assert_eq!(out.summary.init_remeshings, 0);
        let taus: Vec<f64> = out.log.iter().map(|r| r.tau).collect();
        // row τ is a difference of times, so compare up to roundoff
        assert!(taus.iter().any(|&t| (t - 0.08).abs() < 1e-12), "{taus:?}");
        assert!(taus.iter().all(|&t| t <= 0.08 + 1e-12), "{taus:?}");
        assert!((out.summary.final_t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_time_tolerance_keeps_the_step() {
        let mut c = custom();
        c.initial = Initial::Gaussian;
        c.t_end = 0.1;
        let out = run(&c, None, &mut NoObserver).unwrap();
        assert_eq!(out.log.len(), 10);
        assert!(out.log.iter().all(|r| (r.tau - 0.01).abs() < 1e-15));
        assert_eq!(out.log.last().unwrap().t, 0.1);
    }

    #[test]
    fn fhn_rest_grows_to_the_cap() {
        let mut c = RunConfig::preset(Scenario::Test3, Scale::Desk);
        c.mesh_nx = 4;
        c.mesh_ny = 4;
        c.initial = Initial::Constant(0.0);
        c.physics = Physics::Monodomain { model: IonicModel::fhn_default(), diffusion: 1.0 };
        c.t_end = 40.0;
        let out = run_monodomain_adaptive(&c, None, &mut NoObserver).unwrap();
        assert!(out.log.iter().all(|r| r.remeshes == 0));
        let top = out.log.iter().map(|r| r.tau).fold(0.0, f64::max);
        assert!((top - 4.0).abs() < 1e-12, "{top}");
        assert!(run_scalar_adaptive(&c, None, &mut NoObserver).is_err());
    }
}
