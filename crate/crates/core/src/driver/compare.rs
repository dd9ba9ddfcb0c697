//! Errors of a coarse run against a finer reference run.
//!
//! The coarse discrete solution is kept as a list of intervals, each linear
//! in time on its own mesh. The reference run streams its steps into an
//! [`ErrorAccumulator`], which integrates on the reference mesh: the coarse
//! solution is located at the reference Gauss points and the error, linear
//! in time between the breakpoints of both grids, is integrated exactly in
//! time.

use std::collections::HashMap;
use std::path::Path;
use std::rc::Rc;

use super::config::RunConfig;
use super::output::{read_artifact, read_log, Action, ARTIFACT_LEVELS};
use super::run::{run, Observer, StepView};
use crate::error::{Error, Result};
use crate::estimators::{effectivity_indices, EffectivityIndices, ReferenceErrors};
use crate::fem::MeshData;
use crate::mesh::{locate_point, Location, Mesh, Point};
use crate::quadrature::TriangleRule;

/// A mesh of the coarse trajectory with its derived data.
pub struct CoarseMesh {
    pub mesh: Mesh,
    pub data: MeshData,
}

/// The coarse solution on `[t0, t1]`.
pub struct CoarseInterval {
    pub t0: f64,
    pub t1: f64,
    pub mesh: Rc<CoarseMesh>,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub w0: Option<Vec<f64>>,
    pub w1: Option<Vec<f64>>,
}

/// A whole coarse run, interval by interval.
#[derive(Default)]
pub struct Trajectory {
    pub intervals: Vec<CoarseInterval>,
}

impl Trajectory {
    fn push(&mut self, mesh: &Mesh, data: &MeshData, t0: f64, t1: f64, l0: (&[f64], Option<&[f64]>), l1: (&[f64], Option<&[f64]>)) {
        let shared = match self.intervals.last() {
            Some(iv) if iv.mesh.mesh.generation() == mesh.generation() => iv.mesh.clone(),
            _ => Rc::new(CoarseMesh { mesh: mesh.clone(), data: data.clone() }),
        };
        self.intervals.push(CoarseInterval {
            t0,
            t1,
            mesh: shared,
            u0: l0.0.to_vec(),
            u1: l1.0.to_vec(),
            w0: l0.1.map(<[f64]>::to_vec),
            w1: l1.1.map(<[f64]>::to_vec),
        });
    }

    /// Rebuilds the trajectory from per-step artifacts `1..=steps`.
    pub fn from_artifacts(dir: &Path, steps: usize) -> Result<Self> {
        let mut tr = Self::default();
        for n in 1..=steps {
            let (mesh, h) = read_artifact(dir, n)?;
            if h.len() < 2 {
                return Err(Error::History { needed: 2, available: h.len() });
            }
            // artifacts of one mesh share it
            let (mesh, data) = match tr.intervals.last() {
                Some(iv) if iv.mesh.mesh.vertices() == mesh.vertices() && iv.mesh.mesh.triangles() == mesh.triangles() => {
                    (iv.mesh.mesh.clone(), iv.mesh.data.clone())
                }
                _ => {
                    let data = MeshData::new(&mesh)?;
                    (mesh, data)
                }
            };
            let (a, b) = (h.level(1), h.level(0));
            tr.push(&mesh, &data, a.t, b.t, (&a.u, a.w.as_deref()), (&b.u, b.w.as_deref()));
        }
        tr.check()?;
        Ok(tr)
    }

    fn check(&self) -> Result<()> {
        for w in self.intervals.windows(2) {
            if w[0].t1 != w[1].t0 {
                return Err(Error::Alignment(format!("coarse intervals end at {} and restart at {}", w[0].t1, w[1].t0)));
            }
        }
        Ok(())
    }

    pub fn span(&self) -> (f64, f64) {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(a), Some(b)) => (a.t0, b.t1),
            _ => (0.0, 0.0),
        }
    }
}

/// Records the trajectory of a run.
#[derive(Default)]
pub struct TrajectoryRecorder {
    pub trajectory: Trajectory,
}

impl Observer for TrajectoryRecorder {
    fn accepted(&mut self, v: &StepView<'_>) -> Result<()> {
        let (a, b) = (v.history.level(1), v.history.level(0));
        self.trajectory.push(v.mesh, v.data, a.t, b.t, (&a.u, a.w.as_deref()), (&b.u, b.w.as_deref()));
        Ok(())
    }

    fn restarted(&mut self) {
        self.trajectory.intervals.clear();
    }
}

/// Errors at one requested time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// `|e(t)|₁`.
    pub h1: f64,
    /// `‖e(t)‖₀`.
    pub l2: f64,
}

/// Result of a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    /// `⫴e⫴` with the base rule.
    pub energy: f64,
    /// `⫴e⫴` with the once subdivided rule.
    pub energy_subdivided: f64,
    /// `|subdivided − base| / subdivided`.
    pub relative_change: f64,
    /// `‖e_w‖_{L²(0,T;L²)}` for the monodomain model.
    pub w_l2: Option<f64>,
    pub snapshots: Vec<Snapshot>,
    pub indices: Option<EffectivityIndices>,
}

impl Comparison {
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let f = crate::textio::fmt_f64;
        let mut s = String::new();
        let _ = writeln!(s, "energy error        {}", f(self.energy));
        let _ = writeln!(s, "energy subdivided   {}", f(self.energy_subdivided));
        let _ = writeln!(s, "relative change     {}", f(self.relative_change));
        if let Some(w) = self.w_l2 {
            let _ = writeln!(s, "w L2 error          {}", f(w));
        }
        for sn in &self.snapshots {
            let _ = writeln!(s, "t {} h1 {} l2 {}", f(sn.t), f(sn.h1), f(sn.l2));
        }
        if let Some(i) = &self.indices {
            let _ = writeln!(s, "ei                  {}", f(i.ei));
            let _ = writeln!(s, "ei_s                {}", f(i.ei_s));
            let _ = writeln!(s, "ei_t                {}", f(i.ei_t));
            if let Some(w) = i.ei_sw {
                let _ = writeln!(s, "ei_sw               {}", f(w));
            }
        }
        s
    }
}

/// Coarse estimator totals for the effectivity indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoarseEstimates {
    pub eta_s: f64,
    pub eta_t: f64,
    pub omega_w: Option<f64>,
}

impl CoarseEstimates {
    /// Totals from a run log (restart rows excluded).
    pub fn from_log(rows: &[super::output::LogRow]) -> Self {
        let acc: Vec<_> = rows.iter().filter(|r| r.action != Action::Restart).collect();
        let sq = |f: &dyn Fn(&super::output::LogRow) -> Option<f64>| acc.iter().filter_map(|r| f(r)).map(|v| v * v).sum::<f64>().sqrt();
        let omega =
            acc.iter().any(|r| r.omega_w.is_some()).then(|| acc.iter().filter_map(|r| r.omega_w.map(|o| r.tau * o * o)).sum::<f64>().sqrt());
        Self { eta_s: sq(&|r| Some(r.eta_s)), eta_t: sq(&|r| r.eta_t), omega_w: omega }
    }
}

struct Rules {
    base: TriangleRule,
    fine: TriangleRule,
}

/// Integrates the error of a [`Trajectory`] over the steps of a finer run.
pub struct ErrorAccumulator<'a> {
    coarse: &'a Trajectory,
    rules: Rules,
    times: Vec<f64>,
    /// `(fine generation, coarse generation)` → locations of the base and
    /// subdivided points.
    cache: HashMap<(u64, u64), Rc<(Vec<Location>, Vec<Location>)>>,
    energy_sq: [f64; 2],
    w_sq: f64,
    has_w: bool,
    covered: f64,
    snapshots: Vec<Snapshot>,
}

fn gauss_points(mesh: &Mesh, rule: &TriangleRule) -> Vec<Point> {
    let mut out = Vec::with_capacity(mesh.num_triangles() * rule.points.len());
    for k in 0..mesh.num_triangles() {
        let p = mesh.triangle_points(k);
        for b in &rule.points {
            out.push([0, 1].map(|d| b[0] * p[0][d] + b[1] * p[1][d] + b[2] * p[2][d]));
        }
    }
    out
}

fn locate_all(cm: &CoarseMesh, pts: &[Point]) -> Result<Vec<Location>> {
    let mut seed = None;
    pts.iter()
        .map(|&p| {
            let loc = locate_point(&cm.mesh, &cm.data.adjacency, p, seed)?;
            seed = Some(loc.triangle);
            Ok(loc)
        })
        .collect()
}

fn grad_at(cm: &CoarseMesh, loc: &Location, v: &[f64]) -> [f64; 2] {
    cm.data.gradient(&cm.mesh, loc.triangle, v)
}

fn lerp2(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// `∫_a^b |e(t)|² dt` for `e` linear in time with end values `ea`, `eb`.
fn linear_sq(len: f64, ea: [f64; 2], eb: [f64; 2]) -> f64 {
    let dot = |x: [f64; 2], y: [f64; 2]| x[0] * y[0] + x[1] * y[1];
    len / 3.0 * (dot(ea, ea) + dot(ea, eb) + dot(eb, eb))
}

/// The reference step `[t0, t1]` with levels `(u, w)` at both ends.
pub struct FineStep<'s> {
    pub mesh: &'s Mesh,
    pub data: &'s MeshData,
    pub t0: f64,
    pub t1: f64,
    pub l0: (&'s [f64], Option<&'s [f64]>),
    pub l1: (&'s [f64], Option<&'s [f64]>),
}

impl<'a> ErrorAccumulator<'a> {
    /// `times` are the snapshot times for `|e|₁` and `‖e‖₀`.
    pub fn new(coarse: &'a Trajectory, times: &[f64]) -> Self {
        // interior points only: a point on an edge would pick either
        // neighbour's gradient
        let base = TriangleRule::degree5();
        let fine = base.subdivided(1);
        let has_w = coarse.intervals.first().is_some_and(|iv| iv.w0.is_some());
        Self {
            coarse,
            rules: Rules { base, fine },
            times: times.to_vec(),
            cache: HashMap::new(),
            energy_sq: [0.0; 2],
            w_sq: 0.0,
            has_w,
            covered: 0.0,
            snapshots: Vec::new(),
        }
    }

    fn locations(&mut self, fine: &Mesh, cm: &CoarseMesh) -> Result<Rc<(Vec<Location>, Vec<Location>)>> {
        let key = (fine.generation(), cm.mesh.generation());
        if let Some(l) = self.cache.get(&key) {
            return Ok(l.clone());
        }
        // keep only entries of the current reference mesh
        self.cache.retain(|k, _| k.0 == key.0);
        let a = locate_all(cm, &gauss_points(fine, &self.rules.base))?;
        let b = locate_all(cm, &gauss_points(fine, &self.rules.fine))?;
        let l = Rc::new((a, b));
        self.cache.insert(key, l.clone());
        Ok(l)
    }

    /// Adds one reference step.
    pub fn add(&mut self, s: &FineStep<'_>) -> Result<()> {
        let coarse = self.coarse;
        let (c0, c1) = coarse.span();
        let (a, b) = (s.t0.max(c0), s.t1.min(c1));
        if !(b > a) {
            return Ok(());
        }
        let gf0 = s.data.gradients(s.mesh, s.l0.0);
        let gf1 = s.data.gradients(s.mesh, s.l1.0);
        let fine_at = |t: f64| (t - s.t0) / (s.t1 - s.t0);
        let first = coarse.intervals.partition_point(|iv| iv.t1 <= a);
        for iv in &coarse.intervals[first..] {
            if iv.t0 >= b {
                break;
            }
            let (pa, pb) = (a.max(iv.t0), b.min(iv.t1));
            if !(pb > pa) {
                continue;
            }
            let cm = iv.mesh.clone();
            let locs = self.locations(s.mesh, &cm)?;
            let coarse_at = |t: f64| (t - iv.t0) / (iv.t1 - iv.t0);
            let (fa, fb, ca, cb) = (fine_at(pa), fine_at(pb), coarse_at(pa), coarse_at(pb));
            for (r, (rule, loc)) in [(&self.rules.base, &locs.0), (&self.rules.fine, &locs.1)].into_iter().enumerate() {
                let nq = rule.points.len();
                let mut sum = 0.0;
                for k in 0..s.mesh.num_triangles() {
                    let (ga, gb) = (lerp2(gf0[k], gf1[k], fa), lerp2(gf0[k], gf1[k], fb));
                    let mut e = 0.0;
                    for q in 0..nq {
                        let l = &loc[k * nq + q];
                        let (h0, h1) = (grad_at(&cm, l, &iv.u0), grad_at(&cm, l, &iv.u1));
                        let (ha, hb) = (lerp2(h0, h1, ca), lerp2(h0, h1, cb));
                        let ea = [ga[0] - ha[0], ga[1] - ha[1]];
                        let eb = [gb[0] - hb[0], gb[1] - hb[1]];
                        e += rule.weights[q] * linear_sq(pb - pa, ea, eb);
                    }
                    sum += e * s.data.area[k];
                }
                self.energy_sq[r] += sum;
            }
            if let (Some(w0), Some(w1), Some(cw0), Some(cw1)) = (s.l0.1, s.l1.1, &iv.w0, &iv.w1) {
                self.w_sq += self.value_error_sq(s, &cm, &locs.0, (w0, w1), (cw0, cw1), (fa, fb), (ca, cb), pb - pa);
            }
            self.covered += pb - pa;
        }
        for i in 0..self.times.len() {
            let t = self.times[i];
            if t > s.t0 && t <= s.t1 || (t == s.t0 && t == c0) {
                if let Some(sn) = self.snapshot(s, t)? {
                    self.snapshots.push(sn);
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn value_error_sq(
        &self,
        s: &FineStep<'_>,
        cm: &CoarseMesh,
        loc: &[Location],
        fine: (&[f64], &[f64]),
        coarse: (&[f64], &[f64]),
        (fa, fb): (f64, f64),
        (ca, cb): (f64, f64),
        len: f64,
    ) -> f64 {
        let rule = &self.rules.base;
        let nq = rule.points.len();
        let mut sum = 0.0;
        for (k, tri) in s.mesh.triangles().iter().enumerate() {
            let mut e = 0.0;
            for q in 0..nq {
                let b = &rule.points[q];
                let fv = |v: &[f64]| b[0] * v[tri[0]] + b[1] * v[tri[1]] + b[2] * v[tri[2]];
                let (f0, f1) = (fv(fine.0), fv(fine.1));
                let l = &loc[k * nq + q];
                let (g0, g1) = (l.eval(&cm.mesh, coarse.0), l.eval(&cm.mesh, coarse.1));
                let ea = f0 + fa * (f1 - f0) - (g0 + ca * (g1 - g0));
                let eb = f0 + fb * (f1 - f0) - (g0 + cb * (g1 - g0));
                e += rule.weights[q] * linear_sq(len, [ea, 0.0], [eb, 0.0]);
            }
            sum += e * s.data.area[k];
        }
        sum
    }

    fn snapshot(&mut self, s: &FineStep<'_>, t: f64) -> Result<Option<Snapshot>> {
        let coarse = self.coarse;
        let (c0, c1) = coarse.span();
        if t < c0 || t > c1 {
            return Ok(None);
        }
        let i = coarse.intervals.partition_point(|iv| iv.t1 < t).min(coarse.intervals.len() - 1);
        let iv = &coarse.intervals[i];
        let cm = iv.mesh.clone();
        let locs = self.locations(s.mesh, &cm)?;
        let sf = (t - s.t0) / (s.t1 - s.t0);
        let sc = (t - iv.t0) / (iv.t1 - iv.t0);
        let rule = &self.rules.fine;
        let nq = rule.points.len();
        let (mut h1, mut l2) = (0.0, 0.0);
        let mix = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect() };
        let uf = mix(s.l0.0, s.l1.0, sf);
        let uc = mix(&iv.u0, &iv.u1, sc);
        for (k, tri) in s.mesh.triangles().iter().enumerate() {
            let gf = s.data.gradient(s.mesh, k, &uf);
            let (mut a, mut b) = (0.0, 0.0);
            for q in 0..nq {
                let l = &locs.1[k * nq + q];
                let gc = grad_at(&cm, l, &uc);
                let bq = &rule.points[q];
                let fv = bq[0] * uf[tri[0]] + bq[1] * uf[tri[1]] + bq[2] * uf[tri[2]];
                let e = fv - l.eval(&cm.mesh, &uc);
                a += rule.weights[q] * ((gf[0] - gc[0]).powi(2) + (gf[1] - gc[1]).powi(2));
                b += rule.weights[q] * e * e;
            }
            h1 += a * s.data.area[k];
            l2 += b * s.data.area[k];
        }
        Ok(Some(Snapshot { t, h1: h1.sqrt(), l2: l2.sqrt() }))
    }

    /// Final norms; fails if the reference did not cover the coarse run.
    pub fn finish(self, estimates: Option<&CoarseEstimates>) -> Result<Comparison> {
        let (c0, c1) = self.coarse.span();
        let span = c1 - c0;
        if (self.covered - span).abs() > 1e-9 * span.max(1e-300) {
            return Err(Error::Alignment(format!("reference covers {} of the coarse span {span}", self.covered)));
        }
        let energy = self.energy_sq[0].sqrt();
        let energy_subdivided = self.energy_sq[1].sqrt();
        let relative_change = if energy_subdivided > 0.0 { (energy_subdivided - energy).abs() / energy_subdivided } else { 0.0 };
        let w_l2 = self.has_w.then(|| self.w_sq.sqrt());
        let indices = match estimates {
            Some(e) => Some(effectivity_indices(e.eta_s, e.eta_t, e.omega_w, &ReferenceErrors { energy: energy_subdivided, w_l2 })?),
            None => None,
        };
        Ok(Comparison { energy, energy_subdivided, relative_change, w_l2, snapshots: self.snapshots, indices })
    }
}

impl Observer for ErrorAccumulator<'_> {
    fn accepted(&mut self, v: &StepView<'_>) -> Result<()> {
        let (a, b) = (v.history.level(1), v.history.level(0));
        self.add(&FineStep {
            mesh: v.mesh,
            data: v.data,
            t0: a.t,
            t1: b.t,
            l0: (&a.u, a.w.as_deref()),
            l1: (&b.u, b.w.as_deref()),
        })
    }

    fn restarted(&mut self) {
        self.energy_sq = [0.0; 2];
        self.w_sq = 0.0;
        self.covered = 0.0;
        self.snapshots.clear();
    }
}

/// Runs `reference` and compares the coarse trajectory against it.
pub fn compare_reference(
    coarse: &Trajectory,
    estimates: Option<&CoarseEstimates>,
    reference: &RunConfig,
    times: &[f64],
) -> Result<Comparison> {
    let mut acc = ErrorAccumulator::new(coarse, times);
    run(reference, None, &mut acc)?;
    acc.finish(estimates)
}

/// Compares two runs stored with `artifact_stride = 1`.
pub fn compare_artifacts(coarse_dir: &Path, reference_dir: &Path, times: &[f64]) -> Result<Comparison> {
    let count = |dir: &Path| -> Result<(usize, CoarseEstimates)> {
        let rows = read_log(&dir.join("log.csv"))?;
        let steps = rows.iter().filter(|r| r.action != Action::Restart).count();
        Ok((steps, CoarseEstimates::from_log(&rows)))
    };
    let (nc, est) = count(coarse_dir)?;
    let (nr, _) = count(reference_dir)?;
    let coarse = Trajectory::from_artifacts(coarse_dir, nc)?;
    let mut acc = ErrorAccumulator::new(&coarse, times);
    for n in 1..=nr {
        let (mesh, h) = read_artifact(reference_dir, n)?;
        if h.len() < 2 || ARTIFACT_LEVELS < 2 {
            return Err(Error::History { needed: 2, available: h.len() });
        }
        let data = MeshData::new(&mesh)?;
        let (a, b) = (h.level(1), h.level(0));
        acc.add(&FineStep { mesh: &mesh, data: &data, t0: a.t, t1: b.t, l0: (&a.u, a.w.as_deref()), l1: (&b.u, b.w.as_deref()) })?;
    }
    acc.finish(Some(&est))
}

/// `‖u_h − u‖₀` against a function, with the quintic rule.
pub fn l2_error(mesh: &Mesh, data: &MeshData, u: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let rule = TriangleRule::degree5();
    let mut sum = 0.0;
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(k);
        let mut e = 0.0;
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            let x = [0, 1].map(|d| b[0] * p[0][d] + b[1] * p[1][d] + b[2] * p[2][d]);
            let v = b[0] * u[tri[0]] + b[1] * u[tri[1]] + b[2] * u[tri[2]];
            e += w * (v - exact(x)).powi(2);
        }
        sum += e * data.area[k];
    }
    sum.sqrt()
}
