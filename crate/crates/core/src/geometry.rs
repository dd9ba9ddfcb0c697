//! Element frames relative to the reference equilateral triangle and the
//! algebra of 2×2 metric tensors.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::textio::{fmt_f64, Tokens};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Vertices of the reference triangle.
pub const REFERENCE_VERTICES: [Point; 3] = [[0.0, 1.0], [-SQRT3 / 2.0, -0.5], [SQRT3 / 2.0, -0.5]];

/// Area of the reference triangle, `3√3/4`.
pub const REFERENCE_AREA: f64 = 3.0 * SQRT3 / 4.0;

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Eigen-decomposition of a [`Sym2`], eigenvalues in decreasing order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigen2 {
    pub max: f64,
    pub min: f64,
    /// Unit eigenvector of `max`.
    pub v_max: [f64; 2],
    /// Unit eigenvector of `min`, equal to `v_max` rotated by +90°.
    pub v_min: [f64; 2],
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { a: 0.0, b: 0.0, c: 0.0 };

    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn scaled_identity(s: f64) -> Self {
        Self::new(s, 0.0, s)
    }

    pub fn diag(a: f64, c: f64) -> Self {
        Self::new(a, 0.0, c)
    }

    /// `v vᵀ`.
    pub fn outer(v: [f64; 2]) -> Self {
        Self::new(v[0] * v[0], v[0] * v[1], v[1] * v[1])
    }

    /// `s1 v1 v1ᵀ + s2 v2 v2ᵀ`.
    pub fn from_eigen(s1: f64, v1: [f64; 2], s2: f64, v2: [f64; 2]) -> Self {
        Self::outer(v1).scale(s1).add(&Self::outer(v2).scale(s2))
    }

    pub fn add(&self, o: &Sym2) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.a, s * self.b, s * self.c)
    }

    pub fn trace(&self) -> f64 {
        self.a + self.c
    }

    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    /// `vᵀ S v`.
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.a * v[0] * v[0] + 2.0 * self.b * v[0] * v[1] + self.c * v[1] * v[1]
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    pub fn eigen(&self) -> Eigen2 {
        let m = 0.5 * (self.a + self.c);
        let h = 0.5 * (self.a - self.c);
        let d = h.hypot(self.b);
        let theta = 0.5 * self.b.atan2(h);
        let (s, c) = theta.sin_cos();
        Eigen2 { max: m + d, min: m - d, v_max: [c, s], v_min: [-s, c] }
    }

    /// Lower Cholesky factor `(l11, l21, l22)`, if the matrix is SPD.
    pub fn cholesky(&self) -> Option<(f64, f64, f64)> {
        if !(self.a > 0.0) || !self.is_finite() {
            return None;
        }
        let l11 = self.a.sqrt();
        let l21 = self.b / l11;
        let r = self.c - l21 * l21;
        if !(r > 0.0) {
            return None;
        }
        Some((l11, l21, r.sqrt()))
    }
}

/// Symmetric positive-definite metric tensor (units length⁻²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric(Sym2);

impl Metric {
    pub fn new(m: Sym2) -> Result<Self> {
        if m.cholesky().is_none() {
            return Err(Error::InvalidMetric(m.a, m.b, m.c));
        }
        Ok(Self(m))
    }

    /// Isotropic metric prescribing edge length `h`.
    pub fn isotropic(h: f64) -> Result<Self> {
        Self::new(Sym2::scaled_identity(1.0 / (h * h)))
    }

    pub fn sym(&self) -> Sym2 {
        self.0
    }

    /// Symmetric part of `m` with eigenvalues clamped into `[lo, hi]`.
    pub fn project(m: Sym2, lo: f64, hi: f64) -> Result<Self> {
        if !m.is_finite() || !(lo > 0.0) || !(hi >= lo) {
            return Err(Error::InvalidMetric(m.a, m.b, m.c));
        }
        let e = m.eigen();
        let s1 = e.max.clamp(lo, hi);
        let s2 = e.min.clamp(lo, hi);
        Self::new(Sym2::from_eigen(s1, e.v_max, s2, e.v_min))
    }

    /// Clamps prescribed sizes to `[h_min, h_max]`.
    pub fn clamp_sizes(&self, h_min: f64, h_max: f64) -> Result<Self> {
        Self::project(self.0, 1.0 / (h_max * h_max), 1.0 / (h_min * h_min))
    }

    /// Length of `e` measured in this metric.
    pub fn length(&self, e: [f64; 2]) -> f64 {
        self.0.quad(e).max(0.0).sqrt()
    }
}

/// SVD data of the affine map from the reference triangle onto an element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementFrame {
    pub lambda1: f64,
    pub lambda2: f64,
    pub r1: [f64; 2],
    pub r2: [f64; 2],
    /// Row-major `J_K`.
    pub jacobian: [[f64; 2]; 2],
    pub area: f64,
    /// Longest edge length.
    pub h: f64,
}

/// Frame of the triangle `p` whose vertex `i` is the image of reference vertex `i`.
pub fn element_frame(p: [Point; 3]) -> Result<ElementFrame> {
    let e = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
    let area = 0.5 * (e[0][0] * e[1][1] - e[0][1] * e[1][0]);
    if !(area > 0.0) {
        return Err(Error::DegenerateElement { index: 0, area });
    }
    let rv = REFERENCE_VERTICES;
    let r = [[rv[1][0] - rv[0][0], rv[2][0] - rv[0][0]], [rv[1][1] - rv[0][1], rv[2][1] - rv[0][1]]];
    let rdet = r[0][0] * r[1][1] - r[0][1] * r[1][0];
    let rinv = [[r[1][1] / rdet, -r[0][1] / rdet], [-r[1][0] / rdet, r[0][0] / rdet]];
    let mut j = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            j[a][b] = e[a][0] * rinv[0][b] + e[a][1] * rinv[1][b];
        }
    }
    let jjt = Sym2::new(
        j[0][0] * j[0][0] + j[0][1] * j[0][1],
        j[0][0] * j[1][0] + j[0][1] * j[1][1],
        j[1][0] * j[1][0] + j[1][1] * j[1][1],
    );
    let eig = jjt.eigen();
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let lambda1 = eig.max.max(0.0).sqrt();
    let lambda2 = det.abs() / lambda1;
    let edge = |a: Point, b: Point| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let h = edge(p[0], p[1]).max(edge(p[1], p[2])).max(edge(p[2], p[0]));
    Ok(ElementFrame { lambda1, lambda2, r1: eig.v_max, r2: eig.v_min, jacobian: j, area, h })
}

/// `M = Rᵀ Λ⁻² R`.
pub fn frame_to_metric(frame: &ElementFrame) -> Result<Metric> {
    sizes_to_metric(frame.lambda1, frame.lambda2, frame.r1)
}

/// Metric with size `l1` along `r1` and `l2` across it.
pub fn sizes_to_metric(l1: f64, l2: f64, r1: [f64; 2]) -> Result<Metric> {
    let r2 = [-r1[1], r1[0]];
    Metric::new(Sym2::from_eigen(1.0 / (l1 * l1), r1, 1.0 / (l2 * l2), r2))
}

/// Inverse of [`frame_to_metric`]: `(λ1, λ2, r1, r2)` with `λ1 ≥ λ2`.
pub fn metric_to_frame(m: &Metric) -> (f64, f64, [f64; 2], [f64; 2]) {
    let e = m.0.eigen();
    (1.0 / e.min.sqrt(), 1.0 / e.max.sqrt(), e.v_min, e.v_max)
}

/// Arithmetic mean of tensors.
pub fn metric_vertex_average(metrics: &[Metric]) -> Result<Metric> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("cannot average an empty set of metrics".into()));
    }
    let sum = metrics.iter().fold(Sym2::ZERO, |s, m| s.add(&m.0));
    Metric::new(sum.scale(1.0 / metrics.len() as f64))
}

/// Intersection by simultaneous reduction.
pub fn metric_intersect(m1: &Metric, m2: &Metric) -> Result<Metric> {
    let (l11, l21, l22) = m1.0.cholesky().ok_or(Error::InvalidMetric(m1.0.a, m1.0.b, m1.0.c))?;
    m2.0.cholesky().ok_or(Error::InvalidMetric(m2.0.a, m2.0.b, m2.0.c))?;
    // N = L⁻¹ m2 L⁻ᵀ with L = [[l11, 0], [l21, l22]]
    let linv = [[1.0 / l11, 0.0], [-l21 / (l11 * l22), 1.0 / l22]];
    let m = [[m2.0.a, m2.0.b], [m2.0.b, m2.0.c]];
    let mut t = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            t[i][j] = linv[i][0] * m[0][j] + linv[i][1] * m[1][j];
        }
    }
    let n = Sym2::new(
        t[0][0] * linv[0][0] + t[0][1] * linv[0][1],
        t[0][0] * linv[1][0] + t[0][1] * linv[1][1],
        t[1][0] * linv[1][0] + t[1][1] * linv[1][1],
    );
    let e = n.eigen();
    let d = Sym2::from_eigen(e.max.max(1.0), e.v_max, e.min.max(1.0), e.v_min);
    // L d Lᵀ
    let l = [[l11, 0.0], [l21, l22]];
    let dm = [[d.a, d.b], [d.b, d.c]];
    let mut ld = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            ld[i][j] = l[i][0] * dm[0][j] + l[i][1] * dm[1][j];
        }
    }
    let r = Sym2::new(
        ld[0][0] * l[0][0] + ld[0][1] * l[0][1],
        ld[0][0] * l[1][0] + ld[0][1] * l[1][1],
        ld[1][0] * l[1][0] + ld[1][1] * l[1][1],
    );
    Metric::new(r)
}

/// Edge length averaged over the two endpoint metrics.
pub fn metric_edge_length(ma: &Metric, mb: &Metric, e: [f64; 2]) -> f64 {
    0.5 * (ma.length(e) + mb.length(e))
}

/// One metric per mesh vertex.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub metrics: Vec<Metric>,
    pub generation: u64,
}

impl MetricField {
    pub fn new(mesh: &Mesh, metrics: Vec<Metric>) -> Result<Self> {
        if metrics.len() != mesh.num_vertices() {
            return Err(Error::InvalidArgument(format!(
                "metric field has {} entries for {} vertices",
                metrics.len(),
                mesh.num_vertices()
            )));
        }
        Ok(Self { metrics, generation: mesh.generation() })
    }

    pub fn uniform(mesh: &Mesh, m: Metric) -> Self {
        Self { metrics: vec![m; mesh.num_vertices()], generation: mesh.generation() }
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.generation != mesh.generation() || self.metrics.len() != mesh.num_vertices() {
            return Err(Error::Stale { field: self.generation, mesh: mesh.generation() });
        }
        Ok(())
    }
}

pub fn metric_field_to_string(field: &MetricField) -> String {
    let mut s = String::with_capacity(64 * field.metrics.len() + 16);
    let _ = writeln!(s, "rdmetric 1\n{}", field.metrics.len());
    for m in &field.metrics {
        let m = m.sym();
        let _ = writeln!(s, "{} {} {}", fmt_f64(m.a), fmt_f64(m.b), fmt_f64(m.c));
    }
    s
}

pub fn write_metric_field(field: &MetricField, path: &Path) -> Result<()> {
    std::fs::write(path, metric_field_to_string(field))?;
    Ok(())
}

/// Parses a metric file and attaches it to `mesh`.
pub fn parse_metric_field(text: &str, path: &Path, mesh: &Mesh) -> Result<MetricField> {
    let mut tk = Tokens::new(text, path);
    tk.expect_header("rdmetric")?;
    let n: usize = tk.next_parse()?;
    let mut metrics = Vec::with_capacity(n);
    for i in 0..n {
        let m = Sym2::new(tk.next_parse()?, tk.next_parse()?, tk.next_parse()?);
        metrics.push(Metric::new(m).map_err(|e| tk.error(0, format!("entry {i}: {e}")))?);
    }
    tk.expect_end()?;
    MetricField::new(mesh, metrics)
}

pub fn read_metric_field(path: &Path, mesh: &Mesh) -> Result<MetricField> {
    parse_metric_field(&std::fs::read_to_string(path)?, path, mesh)
}
