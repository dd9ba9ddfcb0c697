//! Metrics from estimator data, their combination over time levels and
//! variables, the remesher, and the adapt/no-adapt decision.

mod remesh;

pub use remesh::{edge_lengths, element_qualities, remesh_to_metric, RemeshConfig, RemeshStats};

use crate::error::{Error, Result};
use crate::fem::{omega, recovery_matrices, MeshData};
use crate::geometry::{metric_intersect, metric_vertex_average, sizes_to_metric, ElementFrame, Metric, MetricField, Sym2};
use crate::mesh::Mesh;

/// Edge length of the equilateral triangle whose circumscribed ellipse has
/// semi-axis `λ` (the reference triangle has unit circumradius).
const EDGE_PER_LAMBDA: f64 = 1.732_050_807_568_877_2;

/// Tolerances and mesh limits of space adaptation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptConfig {
    pub tol_s: f64,
    pub tol_s_u: f64,
    pub tol_s_w: f64,
    pub scalar_band: (f64, f64),
    pub u_band: (f64, f64),
    pub w_band: (f64, f64),
    pub h_min: f64,
    pub h_max: f64,
    pub aspect_max: f64,
    pub remesh: RemeshConfig,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            tol_s: 0.25,
            tol_s_u: 0.25,
            tol_s_w: 0.25,
            scalar_band: (0.1875, 0.75),
            u_band: (0.25, 1.0),
            w_band: (0.25, 0.65),
            h_min: 1e-4,
            h_max: 0.25,
            aspect_max: 20.0,
            remesh: RemeshConfig::default(),
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.tol_s, self.tol_s_u, self.tol_s_w];
        if tols.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config(format!("space tolerances must be positive, got {tols:?}")));
        }
        if !(self.h_min > 0.0 && self.h_min < self.h_max) {
            return Err(Error::Config(format!("need 0 < h_min < h_max, got {} and {}", self.h_min, self.h_max)));
        }
        if !(self.aspect_max >= 1.0) {
            return Err(Error::Config(format!("aspect_max must be at least 1, got {}", self.aspect_max)));
        }
        for (lo, hi) in [self.scalar_band, self.u_band, self.w_band] {
            if !(lo >= 0.0 && lo < hi) {
                return Err(Error::Config(format!("invalid band [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn with_limits(&self) -> RemeshConfig {
        RemeshConfig { h_min: self.h_min, h_max: self.h_max, ..self.remesh }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdaptMode {
    Scalar,
    Monodomain,
}

/// Relative space estimators of one step: `η^S/⫴u⫴` or
/// `(η^{S,U}/⫴u⫴, ω^{S,W}/⫴w⫴)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceRatios {
    pub u: f64,
    pub w: Option<f64>,
}

/// Whether the step's space estimators leave their bands.
pub fn adapt_decision(r: &SpaceRatios, cfg: &AdaptConfig, mode: AdaptMode) -> bool {
    match mode {
        AdaptMode::Scalar => {
            let (lo, hi) = cfg.scalar_band;
            r.u < lo * cfg.tol_s || r.u > hi * cfg.tol_s
        }
        AdaptMode::Monodomain => {
            let w = r.w.unwrap_or(0.0);
            let u_hi = r.u > cfg.u_band.1 * cfg.tol_s_u;
            let w_hi = w > cfg.w_band.1 * cfg.tol_s_w;
            let both_lo = r.u < cfg.u_band.0 * cfg.tol_s_u && w < cfg.w_band.0 * cfg.tol_s_w;
            u_hi || w_hi || both_lo
        }
    }
}

/// Optimal element metric (unit edges) from the recovery matrix `g`.
///
/// The stretching direction is the eigenvector of the smallest eigenvalue
/// of `g`, the aspect ratio `√(g_max/g_min)` capped at `aspect_max`, the area
/// is kept and then scaled by `σ = (target/eta)^exponent`.
pub fn element_target_frame(
    g: &Sym2,
    eta: f64,
    target: f64,
    frame: &ElementFrame,
    exponent: f64,
    cfg: &AdaptConfig,
) -> Result<Metric> {
    if !(target > 0.0) || !(eta >= 0.0) || !g.is_finite() {
        return Err(Error::InvalidArgument(format!("bad target frame data: eta {eta}, target {target}, g {g:?}")));
    }
    if eta == 0.0 {
        return Metric::isotropic(cfg.h_max);
    }
    let e = g.eigen();
    let aspect = if !(e.max > 0.0) {
        1.0
    } else if e.min <= e.max / (cfg.aspect_max * cfg.aspect_max) {
        cfg.aspect_max
    } else {
        (e.max / e.min).sqrt().min(cfg.aspect_max)
    };
    let sigma = (target / eta).powf(exponent);
    let a = frame.lambda1 * frame.lambda2;
    let l1 = (a * aspect).sqrt() * sigma * EDGE_PER_LAMBDA;
    let l2 = (a / aspect).sqrt() * sigma * EDGE_PER_LAMBDA;
    let clamp = |l: f64| l.clamp(cfg.h_min, cfg.h_max);
    sizes_to_metric(clamp(l1), clamp(l2), e.v_min)
}

/// Per-element inputs of one level: recovery matrices and the element
/// indicators to equidistribute.
#[derive(Clone, Debug)]
pub struct LevelIndicators {
    pub g: Vec<Sym2>,
    pub eta: Vec<f64>,
    /// Global budget for this level: `TOL·⫴u_h⫴`.
    pub budget: f64,
}

fn element_metrics(data: &MeshData, lvl: &LevelIndicators, exponent: f64, cfg: &AdaptConfig) -> Result<Vec<Metric>> {
    let nt = data.num_triangles();
    if lvl.g.len() != nt || lvl.eta.len() != nt {
        return Err(Error::InvalidArgument(format!("indicator arrays do not match {nt} elements")));
    }
    // a zero budget (no signal at all) coarsens everywhere
    let target = lvl.budget / (nt as f64).sqrt();
    (0..nt)
        .map(|k| {
            if target > 0.0 {
                element_target_frame(&lvl.g[k], lvl.eta[k], target, &data.frames[k], exponent, cfg)
            } else {
                Metric::isotropic(cfg.h_max)
            }
        })
        .collect()
}

fn average_elements(sets: &[Vec<Metric>]) -> Result<Vec<Metric>> {
    let nt = sets[0].len();
    (0..nt)
        .map(|k| {
            let ms: Vec<Metric> = sets.iter().map(|s| s[k]).collect();
            metric_vertex_average(&ms)
        })
        .collect()
}

fn to_vertices(mesh: &Mesh, data: &MeshData, elem: &[Metric], cfg: &AdaptConfig) -> Result<Vec<Metric>> {
    (0..mesh.num_vertices())
        .map(|v| {
            let ms: Vec<Metric> = data.adjacency.vertex_triangles(v).iter().map(|&k| elem[k]).collect();
            metric_vertex_average(&ms)?.clamp_sizes(cfg.h_min, cfg.h_max)
        })
        .collect()
}

/// Scalar metric: one element metric per level (`σ` exponent 1/2), averaged
/// over the levels, then over the elements around each vertex.
pub fn build_metric_field_scalar(mesh: &Mesh, data: &MeshData, levels: &[LevelIndicators], cfg: &AdaptConfig) -> Result<MetricField> {
    data.check(mesh)?;
    if levels.is_empty() {
        return Err(Error::History { needed: 1, available: 0 });
    }
    let sets = levels.iter().map(|l| element_metrics(data, l, 0.5, cfg)).collect::<Result<Vec<_>>>()?;
    let elem = average_elements(&sets)?;
    MetricField::new(mesh, to_vertices(mesh, data, &elem, cfg)?)
}

/// Monodomain metric: the `u` metric from `η^{S,U}` and the `w` metric from
/// `ω_K` of the level-averaged `w` (exponent 1/3), intersected per vertex.
pub fn build_metric_field_monodomain(
    mesh: &Mesh,
    data: &MeshData,
    u_levels: &[&[f64]],
    w_levels: &[&[f64]],
    eta_u: &[f64],
    budgets: (f64, f64),
    cfg: &AdaptConfig,
) -> Result<MetricField> {
    data.check(mesh)?;
    if u_levels.is_empty() || w_levels.is_empty() {
        return Err(Error::History { needed: 1, available: 0 });
    }
    let mean = |lv: &[&[f64]]| -> Vec<f64> {
        let n = lv.len() as f64;
        (0..lv[0].len()).map(|i| lv.iter().map(|v| v[i]).sum::<f64>() / n).collect()
    };
    let (ubar, wbar) = (mean(u_levels), mean(w_levels));
    let gu = recovery_matrices(mesh, data, &ubar);
    let gw = recovery_matrices(mesh, data, &wbar);
    let om_w: Vec<f64> = (0..data.num_triangles()).map(|k| omega(&data.frames[k], &gw[k])).collect();
    let mu = element_metrics(data, &LevelIndicators { g: gu, eta: eta_u.to_vec(), budget: budgets.0 }, 0.5, cfg)?;
    let mw = element_metrics(data, &LevelIndicators { g: gw, eta: om_w, budget: budgets.1 }, 1.0 / 3.0, cfg)?;
    let vu = to_vertices(mesh, data, &mu, cfg)?;
    let vw = to_vertices(mesh, data, &mw, cfg)?;
    let metrics = vu
        .iter()
        .zip(&vw)
        .map(|(a, b)| metric_intersect(a, b)?.clamp_sizes(cfg.h_min, cfg.h_max))
        .collect::<Result<Vec<_>>>()?;
    MetricField::new(mesh, metrics)
}

/// Remeshes with the size limits of `cfg`.
pub fn adapt_mesh(mesh: &Mesh, metric: &MetricField, cfg: &AdaptConfig) -> Result<(Mesh, RemeshStats)> {
    remesh_to_metric(mesh, metric, &cfg.with_limits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{element_frame, metric_to_frame};
    use approx::assert_relative_eq;

    fn frame() -> ElementFrame {
        element_frame([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]]).unwrap()
    }

    #[test]
    fn isotropic_g_gives_aspect_one() {
        let cfg = AdaptConfig::default();
        let m = element_target_frame(&Sym2::scaled_identity(3.0), 1.0, 1.0, &frame(), 0.5, &cfg).unwrap();
        let (l1, l2, _, _) = metric_to_frame(&m);
        assert_relative_eq!(l1, l2, max_relative = 1e-12);
        let f = frame();
        assert_relative_eq!(l1 * l2, 3.0 * f.lambda1 * f.lambda2, max_relative = 1e-12);
    }

    #[test]
    fn anisotropic_g_stretches_along_small_eigenvector() {
        let cfg = AdaptConfig { h_max: 10.0, ..Default::default() };
        let m = element_target_frame(&Sym2::diag(100.0, 1.0), 1.0, 1.0, &frame(), 0.5, &cfg).unwrap();
        let (l1, l2, r1, _) = metric_to_frame(&m);
        assert_relative_eq!(l1 / l2, 10.0, max_relative = 1e-10);
        assert!(r1[1].abs() > 1.0 - 1e-12);
        let capped = element_target_frame(&Sym2::diag(1.0, 0.0), 1.0, 1.0, &frame(), 0.5, &cfg).unwrap();
        let (l1, l2, _, _) = metric_to_frame(&capped);
        assert_relative_eq!(l1 / l2, cfg.aspect_max, max_relative = 1e-10);
    }

    #[test]
    fn sigma_scales_sizes() {
        let cfg = AdaptConfig::default();
        let g = Sym2::scaled_identity(1.0);
        let base = metric_to_frame(&element_target_frame(&g, 1.0, 1.0, &frame(), 0.5, &cfg).unwrap()).0;
        let quarter = metric_to_frame(&element_target_frame(&g, 4.0, 1.0, &frame(), 0.5, &cfg).unwrap()).0;
        assert_relative_eq!(quarter, base / 2.0, max_relative = 1e-12);
        let zero = element_target_frame(&g, 0.0, 1.0, &frame(), 0.5, &cfg).unwrap();
        assert_relative_eq!(metric_to_frame(&zero).0, cfg.h_max, max_relative = 1e-12);
    }

    #[test]
    fn decisions() {
        let cfg = AdaptConfig { tol_s: 1.0, tol_s_u: 1.0, tol_s_w: 1.0, ..Default::default() };
        assert!(!adapt_decision(&SpaceRatios { u: 0.5, w: None }, &cfg, AdaptMode::Scalar));
        assert!(adapt_decision(&SpaceRatios { u: 0.8, w: None }, &cfg, AdaptMode::Scalar));
        assert!(adapt_decision(&SpaceRatios { u: 0.1, w: None }, &cfg, AdaptMode::Scalar));
        assert!(!adapt_decision(&SpaceRatios { u: 0.5, w: Some(0.1) }, &cfg, AdaptMode::Monodomain));
        assert!(adapt_decision(&SpaceRatios { u: 0.5, w: Some(0.7) }, &cfg, AdaptMode::Monodomain));
        assert!(adapt_decision(&SpaceRatios { u: 0.1, w: Some(0.1) }, &cfg, AdaptMode::Monodomain));
        assert!(adapt_decision(&SpaceRatios { u: 1.1, w: Some(0.3) }, &cfg, AdaptMode::Monodomain));
    }
}
