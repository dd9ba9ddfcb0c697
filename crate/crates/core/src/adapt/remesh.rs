//! Metric-conforming local remeshing: edge splits, edge collapses, edge
//! flips and vertex smoothing measured in a background metric field.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::geometry::{Metric, MetricField, Sym2};
use crate::mesh::{build_adjacency, locate_point, Adjacency, BoundaryEdge, Mesh, Point};

const SPLIT: f64 = std::f64::consts::SQRT_2;
const COLLAPSE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Remesher limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RemeshConfig {
    /// Outer passes of split, collapse, flip and smoothing sweeps.
    pub passes: usize,
    pub h_min: f64,
    pub h_max: f64,
    /// Smallest metric quality a collapse may produce.
    pub quality_floor: f64,
    pub smooth_sweeps: usize,
    pub max_vertices: usize,
}

impl Default for RemeshConfig {
    fn default() -> Self {
        Self { passes: 8, h_min: 1e-4, h_max: 1.0, quality_floor: 0.05, smooth_sweeps: 2, max_vertices: 2_000_000 }
    }
}

/// What a remesh did.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct RemeshStats {
    pub splits: usize,
    pub collapses: usize,
    pub flips: usize,
    pub moves: usize,
    pub passes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Interior,
    /// On a straight boundary segment with this tag.
    Boundary(i32),
    Corner,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

/// `4√3 |K|_M / Σ |e|²_M` with the vertex-averaged metric; 1 for a unit
/// equilateral element, 0 for a flat one.
fn quality(p: [Point; 3], m: [Sym2; 3]) -> f64 {
    let avg = m[0].add(&m[1]).add(&m[2]).scale(1.0 / 3.0);
    let a = area(p[0], p[1], p[2]);
    if !(a > 0.0) {
        return 0.0;
    }
    let s: f64 = (0..3).map(|i| avg.quad(sub(p[(i + 1) % 3], p[i]))).sum();
    4.0 * 3f64.sqrt() * a * avg.det().max(0.0).sqrt() / s
}

/// One edge in a sweep: endpoints and up to two incident triangles.
struct EdgeRec {
    v: (usize, usize),
    tris: [usize; 2],
    count: usize,
}

struct Work<'a> {
    verts: Vec<Point>,
    met: Vec<Sym2>,
    seed: Vec<usize>,
    kind: Vec<Kind>,
    tris: Vec<[usize; 3]>,
    alive: Vec<bool>,
    bnd: HashMap<(usize, usize), i32>,
    bg: &'a Mesh,
    bg_adj: Adjacency,
    bg_metric: &'a MetricField,
    lo: f64,
    hi: f64,
    stats: RemeshStats,
    cfg: RemeshConfig,
}

impl<'a> Work<'a> {
    fn new(mesh: &'a Mesh, metric: &'a MetricField, cfg: RemeshConfig) -> Result<Self> {
        let bg_adj = build_adjacency(mesh)?;
        let nv = mesh.num_vertices();
        let lo = 1.0 / (cfg.h_max * cfg.h_max);
        let hi = 1.0 / (cfg.h_min * cfg.h_min);
        let met = metric.metrics.iter().map(|m| Metric::project(m.sym(), lo, hi).map(|m| m.sym())).collect::<Result<Vec<_>>>()?;
        let mut seed = vec![0; nv];
        for (k, t) in mesh.triangles().iter().enumerate() {
            for &v in t {
                seed[v] = k;
            }
        }
        let mut bnd = HashMap::new();
        let mut incident: Vec<Vec<(usize, i32)>> = vec![Vec::new(); nv];
        for e in mesh.boundary() {
            bnd.insert(key(e.a, e.b), e.tag);
            incident[e.a].push((e.b, e.tag));
            incident[e.b].push((e.a, e.tag));
        }
        let verts = mesh.vertices().to_vec();
        let kind = (0..nv)
            .map(|v| match incident[v].as_slice() {
                [] => Kind::Interior,
                [(a, ta), (b, tb)] if ta == tb => {
                    let (da, db) = (sub(verts[*a], verts[v]), sub(verts[*b], verts[v]));
                    let cross = da[0] * db[1] - da[1] * db[0];
                    let scale = (da[0].hypot(da[1])) * (db[0].hypot(db[1]));
                    if cross.abs() <= 1e-10 * scale {
                        Kind::Boundary(*ta)
                    } else {
                        Kind::Corner
                    }
                }
                _ => Kind::Corner,
            })
            .collect();
        Ok(Self {
            verts,
            met,
            seed,
            kind,
            tris: mesh.triangles().to_vec(),
            alive: vec![true; mesh.num_triangles()],
            bnd,
            bg: mesh,
            bg_adj,
            bg_metric: metric,
            lo,
            hi,
            stats: RemeshStats::default(),
            cfg,
        })
    }

    /// Background metric at `p`, linearly interpolated and projected.
    fn metric_at(&self, p: Point, seed: usize) -> Result<(Sym2, usize)> {
        let loc = locate_point(self.bg, &self.bg_adj, p, Some(seed))?;
        let t = self.bg.triangles()[loc.triangle];
        let mut s = Sym2::ZERO;
        for i in 0..3 {
            s = s.add(&self.bg_metric.metrics[t[i]].sym().scale(loc.bary[i]));
        }
        Ok((Metric::project(s, self.lo, self.hi)?.sym(), loc.triangle))
    }

    fn length(&self, a: usize, b: usize) -> f64 {
        let e = sub(self.verts[b], self.verts[a]);
        0.5 * (self.met[a].quad(e).max(0.0).sqrt() + self.met[b].quad(e).max(0.0).sqrt())
    }

    fn tri_quality(&self, t: [usize; 3]) -> f64 {
        quality([self.verts[t[0]], self.verts[t[1]], self.verts[t[2]]], [self.met[t[0]], self.met[t[1]], self.met[t[2]]])
    }

    fn tri_area(&self, t: [usize; 3]) -> f64 {
        area(self.verts[t[0]], self.verts[t[1]], self.verts[t[2]])
    }

    fn edges(&self) -> Vec<EdgeRec> {
        let mut half: Vec<((usize, usize), usize)> = Vec::with_capacity(3 * self.tris.len());
        for (k, t) in self.tris.iter().enumerate() {
            if self.alive[k] {
                for i in 0..3 {
                    half.push((key(t[i], t[(i + 1) % 3]), k));
                }
            }
        }
        half.sort_unstable();
        let mut out: Vec<EdgeRec> = Vec::with_capacity(half.len() / 2 + 1);
        for (v, k) in half {
            match out.last_mut() {
                Some(e) if e.v == v => {
                    if e.count < 2 {
                        e.tris[e.count] = k;
                    }
                    e.count += 1;
                }
                _ => out.push(EdgeRec { v, tris: [k, usize::MAX], count: 1 }),
            }
        }
        out
    }

    fn vertex_tris(&self) -> Vec<Vec<usize>> {
        let mut v2t = vec![Vec::new(); self.verts.len()];
        for (k, t) in self.tris.iter().enumerate() {
            if self.alive[k] {
                for &v in t {
                    v2t[v].push(k);
                }
            }
        }
        v2t
    }

    fn split_sweep(&mut self) -> Result<usize> {
        let edges = self.edges();
        let mut cands: Vec<(f64, usize)> = edges
            .iter()
            .enumerate()
            .map(|(i, e)| (self.length(e.v.0, e.v.1), i))
            .filter(|(l, _)| *l > SPLIT)
            .collect();
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut touched = vec![false; self.tris.len()];
        let mut count = 0;
        for (_, i) in cands {
            let e = &edges[i];
            let ts = &e.tris[..e.count.min(2)];
            if ts.iter().any(|&k| touched[k]) {
                continue;
            }
            if self.verts.len() >= self.cfg.max_vertices {
                return Err(Error::Remesh(format!("vertex limit {} reached", self.cfg.max_vertices)));
            }
            let (a, b) = e.v;
            let p = [0.5 * (self.verts[a][0] + self.verts[b][0]), 0.5 * (self.verts[a][1] + self.verts[b][1])];
            let (m, seed) = self.metric_at(p, self.seed[a])?;
            let mid = self.verts.len();
            self.verts.push(p);
            self.met.push(m);
            self.seed.push(seed);
            let tag = self.bnd.remove(&key(a, b));
            self.kind.push(tag.map_or(Kind::Interior, Kind::Boundary));
            if let Some(tag) = tag {
                self.bnd.insert(key(a, mid), tag);
                self.bnd.insert(key(mid, b), tag);
            }
            for &k in ts {
                let t = self.tris[k];
                let i = (0..3).find(|&i| key(t[i], t[(i + 1) % 3]) == key(a, b)).expect("edge in triangle");
                let (x, y, c) = (t[i], t[(i + 1) % 3], t[(i + 2) % 3]);
                self.tris[k] = [x, mid, c];
                self.tris.push([mid, y, c]);
                self.alive.push(true);
                touched[k] = true;
                touched.push(true);
            }
            count += 1;
        }
        self.stats.splits += count;
        Ok(count)
    }

    /// Removes `rem` by moving it onto `keep`, if admissible.
    fn try_collapse(&mut self, rem: usize, keep: usize, v2t: &[Vec<usize>], locked: &mut [bool]) -> bool {
        if locked[rem] || locked[keep] {
            return false;
        }
        match self.kind[rem] {
            Kind::Corner => return false,
            Kind::Boundary(_) if !self.bnd.contains_key(&key(rem, keep)) => return false,
            _ => {}
        }
        if self.kind[rem] == Kind::Interior && self.bnd.contains_key(&key(rem, keep)) {
            return false;
        }
        let shared: Vec<usize> = v2t[rem].iter().copied().filter(|&k| self.tris[k].contains(&keep)).collect();
        if shared.is_empty() {
            return false;
        }
        // link condition: common neighbours are exactly the apexes of the shared triangles
        let apex: HashSet<usize> = shared.iter().map(|&k| *self.tris[k].iter().find(|&&v| v != rem && v != keep).unwrap()).collect();
        let nb_rem: HashSet<usize> = v2t[rem].iter().flat_map(|&k| self.tris[k]).filter(|&v| v != rem).collect();
        let nb_keep: HashSet<usize> = v2t[keep].iter().flat_map(|&k| self.tris[k]).filter(|&v| v != keep).collect();
        if nb_rem.intersection(&nb_keep).any(|v| !apex.contains(v)) {
            return false;
        }
        let mut old_q = f64::INFINITY;
        let mut new_q = f64::INFINITY;
        for &k in &v2t[rem] {
            let t = self.tris[k];
            old_q = old_q.min(self.tri_quality(t));
            if t.contains(&keep) {
                continue;
            }
            let nt = t.map(|v| if v == rem { keep } else { v });
            let a_old = self.tri_area(t);
            if !(self.tri_area(nt) > 1e-12 * a_old.abs()) {
                return false;
            }
            new_q = new_q.min(self.tri_quality(nt));
            for &v in &nt {
                if v != keep && self.length(keep, v) > SPLIT {
                    return false;
                }
            }
        }
        if new_q < self.cfg.quality_floor.min(old_q) || new_q < 0.3 * old_q {
            return false;
        }
        for &k in &v2t[rem] {
            if shared.contains(&k) {
                self.alive[k] = false;
            } else {
                self.tris[k] = self.tris[k].map(|v| if v == rem { keep } else { v });
            }
        }
        let tag = self.bnd.remove(&key(rem, keep));
        if tag.is_some() {
            let others: Vec<usize> = nb_rem.iter().copied().filter(|&v| self.bnd.contains_key(&key(rem, v))).collect();
            for v in others {
                let t = self.bnd.remove(&key(rem, v)).expect("boundary edge");
                self.bnd.insert(key(keep, v), t);
            }
        }
        for v in nb_rem.iter().chain(nb_keep.iter()) {
            locked[*v] = true;
        }
        locked[rem] = true;
        locked[keep] = true;
        true
    }

    fn collapse_sweep(&mut self) -> usize {
        let edges = self.edges();
        let mut cands: Vec<(f64, usize)> = edges
            .iter()
            .enumerate()
            .map(|(i, e)| (self.length(e.v.0, e.v.1), i))
            .filter(|(l, _)| *l < COLLAPSE)
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let v2t = self.vertex_tris();
        let mut locked = vec![false; self.verts.len()];
        let mut count = 0;
        for (_, i) in cands {
            let (a, b) = edges[i].v;
            if self.try_collapse(a, b, &v2t, &mut locked) || self.try_collapse(b, a, &v2t, &mut locked) {
                count += 1;
            }
        }
        self.stats.collapses += count;
        count
    }

    fn flip_sweep(&mut self) -> usize {
        let edges = self.edges();
        let mut present: HashSet<(usize, usize)> = edges.iter().map(|e| e.v).collect();
        let mut touched = vec![false; self.tris.len()];
        let mut count = 0;
        for e in &edges {
            if e.count != 2 || self.bnd.contains_key(&e.v) {
                continue;
            }
            let [k1, k2] = e.tris;
            if touched[k1] || touched[k2] {
                continue;
            }
            let (t1, t2) = (self.tris[k1], self.tris[k2]);
            let i = (0..3).find(|&i| key(t1[i], t1[(i + 1) % 3]) == e.v).expect("edge in triangle");
            let (p, q, c) = (t1[i], t1[(i + 1) % 3], t1[(i + 2) % 3]);
            let d = *t2.iter().find(|&&v| v != p && v != q).expect("apex");
            if present.contains(&key(c, d)) {
                continue;
            }
            let (n1, n2) = ([p, d, c], [d, q, c]);
            if !(self.tri_area(n1) > 0.0 && self.tri_area(n2) > 0.0) {
                continue;
            }
            let old = self.tri_quality(t1).min(self.tri_quality(t2));
            let new = self.tri_quality(n1).min(self.tri_quality(n2));
            if new > old * (1.0 + 1e-3) {
                self.tris[k1] = n1;
                self.tris[k2] = n2;
                touched[k1] = true;
                touched[k2] = true;
                present.remove(&e.v);
                present.insert(key(c, d));
                count += 1;
            }
        }
        self.stats.flips += count;
        count
    }

    fn smooth_sweep(&mut self) -> Result<usize> {
        let v2t = self.vertex_tris();
        let mut count = 0;
        for v in 0..self.verts.len() {
            if self.kind[v] != Kind::Interior || v2t[v].is_empty() {
                continue;
            }
            let mut nbs: Vec<usize> = v2t[v].iter().flat_map(|&k| self.tris[k]).filter(|&x| x != v).collect();
            nbs.sort_unstable();
            nbs.dedup();
            let p = self.verts[v];
            let mut disp = [0.0, 0.0];
            for &x in &nbs {
                let l = self.length(v, x);
                if l > 0.0 {
                    let d = sub(self.verts[x], p);
                    disp[0] += d[0] * (1.0 - 1.0 / l);
                    disp[1] += d[1] * (1.0 - 1.0 / l);
                }
            }
            let w = 0.5 / nbs.len() as f64;
            let np = [p[0] + w * disp[0], p[1] + w * disp[1]];
            let old_q = v2t[v].iter().map(|&k| self.tri_quality(self.tris[k])).fold(f64::INFINITY, f64::min);
            let (old_p, old_m) = (p, self.met[v]);
            let Ok((m, seed)) = self.metric_at(np, self.seed[v]) else { continue };
            self.verts[v] = np;
            self.met[v] = m;
            let ok_area = v2t[v].iter().all(|&k| self.tri_area(self.tris[k]) > 0.0);
            let new_q = v2t[v].iter().map(|&k| self.tri_quality(self.tris[k])).fold(f64::INFINITY, f64::min);
            if ok_area && new_q >= old_q {
                self.seed[v] = seed;
                count += 1;
            } else {
                self.verts[v] = old_p;
                self.met[v] = old_m;
            }
        }
        self.stats.moves += count;
        Ok(count)
    }

    fn run(&mut self) -> Result<()> {
        for pass in 0..self.cfg.passes {
            let mut ops = 0;
            for _ in 0..64 {
                let n = self.split_sweep()?;
                ops += n;
                if n == 0 {
                    break;
                }
            }
            for _ in 0..64 {
                let n = self.collapse_sweep();
                ops += n;
                if n == 0 {
                    break;
                }
            }
            for _ in 0..8 {
                let n = self.flip_sweep();
                ops += n;
                if n == 0 {
                    break;
                }
            }
            for _ in 0..self.cfg.smooth_sweeps {
                self.smooth_sweep()?;
            }
            for _ in 0..4 {
                let n = self.flip_sweep();
                ops += n;
                if n == 0 {
                    break;
                }
            }
            self.stats.passes = pass + 1;
            if ops == 0 {
                break;
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Mesh> {
        let mut map = vec![usize::MAX; self.verts.len()];
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for (k, t) in self.tris.iter().enumerate() {
            if !self.alive[k] {
                continue;
            }
            let nt = t.map(|v| {
                if map[v] == usize::MAX {
                    map[v] = verts.len();
                    verts.push(self.verts[v]);
                }
                map[v]
            });
            tris.push(nt);
        }
        let mut boundary = Vec::with_capacity(self.bnd.len());
        for (k, t) in self.tris.iter().enumerate() {
            if !self.alive[k] {
                continue;
            }
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                if let Some(&tag) = self.bnd.get(&key(a, b)) {
                    boundary.push(BoundaryEdge { a: map[a], b: map[b], tag });
                }
            }
        }
        if boundary.len() != self.bnd.len() {
            return Err(Error::Remesh(format!("{} boundary edges lost", self.bnd.len() - boundary.len())));
        }
        let mesh = Mesh::new(verts, tris, boundary).map_err(|e| Error::Remesh(format!("invalid output mesh: {e}")))?;
        build_adjacency(&mesh).map_err(|e| Error::Remesh(format!("invalid output topology: {e}")))?;
        Ok(mesh)
    }
}

/// Remeshes `mesh` towards unit edge lengths in `metric`.
pub fn remesh_to_metric(mesh: &Mesh, metric: &MetricField, cfg: &RemeshConfig) -> Result<(Mesh, RemeshStats)> {
    metric.check(mesh)?;
    if !(cfg.h_min > 0.0 && cfg.h_max > cfg.h_min) {
        return Err(Error::InvalidArgument(format!("invalid size range [{}, {}]", cfg.h_min, cfg.h_max)));
    }
    let mut w = Work::new(mesh, metric, *cfg)?;
    w.run()?;
    let stats = w.stats;
    Ok((w.finish()?, stats))
}

/// Metric length of every edge of `mesh`.
pub fn edge_lengths(mesh: &Mesh, adjacency: &Adjacency, metric: &MetricField) -> Result<Vec<f64>> {
    metric.check(mesh)?;
    adjacency.check(mesh)?;
    let v = mesh.vertices();
    Ok(adjacency
        .edges()
        .iter()
        .map(|e| {
            let d = sub(v[e.v[1]], v[e.v[0]]);
            0.5 * (metric.metrics[e.v[0]].length(d) + metric.metrics[e.v[1]].length(d))
        })
        .collect())
}

/// Metric quality of every element.
pub fn element_qualities(mesh: &Mesh, metric: &MetricField) -> Result<Vec<f64>> {
    metric.check(mesh)?;
    Ok(mesh
        .triangles()
        .iter()
        .map(|t| {
            let p = t.map(|v| mesh.vertices()[v]);
            quality(p, t.map(|v| metric.metrics[v].sym()))
        })
        .collect())
}
