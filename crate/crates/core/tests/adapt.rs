use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdadapt::adapt::{
    build_metric_field_monodomain, build_metric_field_scalar, edge_lengths, remesh_to_metric, AdaptConfig, LevelIndicators,
    RemeshConfig,
};
use rdadapt::fem::{interpolate_nodal, recovery_matrices};
use rdadapt::geometry::{element_frame, metric_to_frame, Metric, MetricField, Sym2};
use rdadapt::mesh::{build_adjacency, generate_uniform_mesh};
use rdadapt::{Mesh, MeshData, Rect};

const BAND: (f64, f64) = (0.9 * std::f64::consts::FRAC_1_SQRT_2, 1.1 * std::f64::consts::SQRT_2);

fn unit(n: usize) -> Mesh {
    generate_uniform_mesh(n, n, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap()
}

fn field(mesh: &Mesh, f: impl Fn(f64, f64) -> Sym2) -> MetricField {
    let ms = mesh.vertices().iter().map(|p| Metric::new(f(p[0], p[1])).unwrap()).collect();
    MetricField::new(mesh, ms).unwrap()
}

fn check_valid(mesh: &Mesh, area: f64) {
    let rebuilt = Mesh::new(mesh.vertices().to_vec(), mesh.triangles().to_vec(), mesh.boundary().to_vec()).unwrap();
    let adj = build_adjacency(&rebuilt).unwrap();
    adj.check(&rebuilt).unwrap();
    for k in 0..mesh.num_triangles() {
        assert!(mesh.triangle_area(k) > 0.0, "triangle {k} inverted");
    }
    assert!((mesh.total_area() - area).abs() <= 1e-12 * area, "area {} vs {area}", mesh.total_area());
    assert_eq!(adj.num_boundary_edges(), mesh.boundary().len());
}

fn in_band_fraction(mesh: &Mesh, f: impl Fn(f64, f64) -> Sym2) -> f64 {
    let metric = field(mesh, f);
    let adj = build_adjacency(mesh).unwrap();
    let ls = edge_lengths(mesh, &adj, &metric).unwrap();
    ls.iter().filter(|&&l| l >= BAND.0 && l <= BAND.1).count() as f64 / ls.len() as f64
}

fn cfg() -> RemeshConfig {
    RemeshConfig { h_min: 1e-3, h_max: 1.0, ..Default::default() }
}

#[test]
fn matching_metric_keeps_element_count() {
    let mesh = unit(10);
    let h = 0.1 * 1.2f64.sqrt();
    // the unit mesh' right triangles have edges h, h and h√2; size the
    // metric so the mean squared length is one
    let m = field(&mesh, |_, _| Sym2::scaled_identity(1.0 / (h * h)));
    let (out, _) = remesh_to_metric(&mesh, &m, &cfg()).unwrap();
    let ratio = out.num_triangles() as f64 / mesh.num_triangles() as f64;
    assert!((0.9..=1.1).contains(&ratio), "ratio {ratio}");
    check_valid(&out, 1.0);
}

#[test]
fn halving_the_size_quadruples_elements() {
    let mesh = unit(8);
    let h = 0.125;
    let m0 = field(&mesh, |_, _| Sym2::scaled_identity(1.0 / (h * h)));
    let (base, _) = remesh_to_metric(&mesh, &m0, &cfg()).unwrap();
    let m1 = field(&base, |_, _| Sym2::scaled_identity(4.0 / (h * h)));
    let (fine, stats) = remesh_to_metric(&base, &m1, &cfg()).unwrap();
    let ratio = fine.num_triangles() as f64 / base.num_triangles() as f64;
    assert!((2.8..=5.2).contains(&ratio), "ratio {ratio}, {stats:?}");
    check_valid(&fine, 1.0);
}

fn smooth_metrics() -> Vec<Box<dyn Fn(f64, f64) -> Sym2>> {
    vec![
        Box::new(|x, _| Sym2::scaled_identity(1.0 / (0.04 + 0.1 * x).powi(2))),
        Box::new(|x, y| {
            let h = 0.03 + 0.08 * ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
            Sym2::scaled_identity(1.0 / (h * h))
        }),
        Box::new(|x, y| {
            let th = 0.5 * (x + y);
            let (c, s) = (th.cos(), th.sin());
            Sym2::from_eigen(1.0 / 0.02f64.powi(2), [c, s], 1.0 / 0.1f64.powi(2), [-s, c])
        }),
    ]
}

#[test]
fn most_edges_are_near_unit_length() {
    for (i, f) in smooth_metrics().into_iter().enumerate() {
        let mut mesh = unit(6);
        // the remesher interpolates the background metric, so iterate with
        // the metric re-sampled on the adapted mesh like the adaptive loop does
        for _ in 0..3 {
            let m = field(&mesh, &f);
            mesh = remesh_to_metric(&mesh, &m, &cfg()).unwrap().0;
        }
        check_valid(&mesh, 1.0);
        let frac = in_band_fraction(&mesh, &f);
        assert!(frac >= 0.85, "metric {i}: {frac} of edges in band");
    }
}

#[test]
fn anisotropic_metric_stretches_elements() {
    let delta: f64 = 0.1;
    let f = |_: f64, _: f64| Sym2::diag(1.0 / (delta * delta * 0.04), 1.0 / 0.04);
    let mut mesh = unit(10);
    for _ in 0..3 {
        let m = field(&mesh, f);
        mesh = remesh_to_metric(&mesh, &m, &cfg()).unwrap().0;
    }
    check_valid(&mesh, 1.0);
    let mean: f64 = (0..mesh.num_triangles())
        .map(|k| {
            let fr = element_frame(mesh.triangle_points(k)).unwrap();
            fr.lambda1 / fr.lambda2
        })
        .sum::<f64>()
        / mesh.num_triangles() as f64;
    assert!(mean >= 3.0, "mean aspect {mean}");
}

#[test]
fn random_cycles_keep_mesh_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let bounds = Rect::new(0.0, 0.0, 2.0, 1.0);
    let mut mesh = generate_uniform_mesh(8, 4, bounds).unwrap();
    for cycle in 0..100 {
        let (cx, cy) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..1.0));
        let h0 = rng.gen_range(0.03..0.2);
        let aspect = rng.gen_range(1.0..6.0);
        let th: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (c, s) = (th.cos(), th.sin());
        let m = field(&mesh, |x, y| {
            let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            let h = h0 * (1.0 + 3.0 * d);
            Sym2::from_eigen(aspect * aspect / (h * h), [c, s], 1.0 / (h * h), [-s, c])
        });
        let (out, _) = remesh_to_metric(&mesh, &m, &RemeshConfig { passes: 3, ..cfg() }).unwrap();
        check_valid(&out, 2.0);
        assert!(out.num_triangles() > 0, "cycle {cycle}");
        mesh = out;
    }
}

#[test]
fn remesh_is_deterministic() {
    let mesh = unit(6);
    let f = &smooth_metrics()[2];
    let m = field(&mesh, f);
    let (a, sa) = remesh_to_metric(&mesh, &m, &cfg()).unwrap();
    let (b, sb) = remesh_to_metric(&mesh, &m, &cfg()).unwrap();
    assert_eq!(sa, sb);
    assert_eq!(a.vertices(), b.vertices());
    assert_eq!(a.triangles(), b.triangles());
}

fn wide() -> AdaptConfig {
    AdaptConfig { h_min: 1e-4, h_max: 10.0, ..Default::default() }
}

fn approx_eq(a: &Metric, b: &Metric, tol: f64) -> bool {
    let (x, y) = (a.sym(), b.sym());
    let s = x.trace().abs().max(y.trace().abs());
    (x.a - y.a).abs() <= tol * s && (x.b - y.b).abs() <= tol * s && (x.c - y.c).abs() <= tol * s
}

#[test]
fn identical_levels_match_one_level() {
    let mesh = unit(6);
    let data = MeshData::new(&mesh).unwrap();
    let u = interpolate_nodal(&mesh, |x, y| (3.0 * x).sin() * y * y).unwrap();
    let g = recovery_matrices(&mesh, &data, &u.values);
    let eta: Vec<f64> = (0..mesh.num_triangles()).map(|k| 0.01 * (1.0 + k as f64 / 10.0)).collect();
    let lvl = LevelIndicators { g, eta, budget: 0.2 };
    let one = build_metric_field_scalar(&mesh, &data, std::slice::from_ref(&lvl), &wide()).unwrap();
    let three = build_metric_field_scalar(&mesh, &data, &[lvl.clone(), lvl.clone(), lvl], &wide()).unwrap();
    for (a, b) in one.metrics.iter().zip(&three.metrics) {
        assert!(approx_eq(a, b, 1e-13));
    }
}

#[test]
fn uniform_isotropic_indicators_give_constant_metric() {
    let mesh = unit(6);
    let data = MeshData::new(&mesh).unwrap();
    let nt = mesh.num_triangles();
    let lvl = LevelIndicators { g: vec![Sym2::identity(); nt], eta: vec![0.05; nt], budget: 0.3 };
    let field = build_metric_field_scalar(&mesh, &data, &[lvl], &wide()).unwrap();
    let m0 = field.metrics[0];
    for m in &field.metrics {
        assert!(approx_eq(m, &m0, 1e-12));
    }
    let (l1, l2, _, _) = metric_to_frame(&m0);
    assert!((l1 / l2 - 1.0).abs() < 1e-12);
}

#[test]
fn affine_w_leaves_the_u_metric() {
    let mesh = unit(6);
    let data = MeshData::new(&mesh).unwrap();
    let u = interpolate_nodal(&mesh, |x, y| (-20.0 * ((x - 0.3).powi(2) + y * y)).exp()).unwrap();
    let w = interpolate_nodal(&mesh, |x, y| 0.2 + 0.5 * x - 0.1 * y).unwrap();
    let eta: Vec<f64> = (0..mesh.num_triangles()).map(|k| 1e-3 * (1.0 + (k % 5) as f64)).collect();
    let cfg = AdaptConfig { h_max: 0.5, ..Default::default() };
    let (uv, wv) = (&u.values[..], &w.values[..]);
    let both = build_metric_field_monodomain(&mesh, &data, &[uv, uv, uv], &[wv, wv, wv], &eta, (0.05, 0.05), &cfg).unwrap();
    // an affine w leaves u's metric: the w side is the coarsest admissible one
    let g = recovery_matrices(&mesh, &data, uv);
    let lvl = LevelIndicators { g, eta, budget: 0.05 };
    let only_u = build_metric_field_scalar(&mesh, &data, &[lvl], &cfg).unwrap();
    for (a, b) in both.metrics.iter().zip(&only_u.metrics) {
        assert!(approx_eq(a, b, 1e-10), "{a:?} vs {b:?}");
    }
}
