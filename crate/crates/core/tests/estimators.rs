use approx::assert_relative_eq;
use rdadapt::bdf2::{Level, TimeHistory, Var};
use rdadapt::estimators::*;
use rdadapt::fem::MeshData;
use rdadapt::mesh::{generate_uniform_mesh, Mesh, Rect};
use rdadapt::{Error, IonicModel, ScalarReaction};

const GL3: [(f64, f64); 3] = [
    (0.1127016653792583, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.8872983346207417, 5.0 / 18.0),
];

fn unit_square(n: usize) -> (Mesh, MeshData) {
    let mesh = generate_uniform_mesh(n, n, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
    let data = MeshData::new(&mesh).unwrap();
    (mesh, data)
}

fn history(mesh: &Mesh, levels: &[(f64, Vec<f64>, Option<Vec<f64>>)]) -> TimeHistory {
    let mut it = levels.iter();
    let (t, u, w) = it.next().unwrap();
    let mut h = TimeHistory::new(Level { t: *t, u: u.clone(), w: w.clone() }, mesh.generation(), 8);
    for (t, u, w) in it {
        h.push(Level { t: *t, u: u.clone(), w: w.clone() });
    }
    h
}

fn scalar_levels(mesh: &Mesh, ts: &[f64], f: impl Fn(f64, f64, f64) -> f64) -> TimeHistory {
    let lv: Vec<_> = ts.iter().map(|&t| (t, mesh.vertices().iter().map(|p| f(p[0], p[1], t)).collect(), None)).collect();
    history(mesh, &lv)
}

fn problem(diffusion: &[f64], reaction: ScalarReaction) -> ScalarProblem<'_> {
    ScalarProblem { reaction, diffusion, source: None, flux: None }
}

#[test]
fn constant_state_gives_zero() {
    let (mesh, data) = unit_square(4);
    let h = scalar_levels(&mesh, &[0.0, 0.1, 0.25, 0.3], |_, _, _| 0.7);
    let a = vec![1.0; mesh.num_triangles()];
    let p = problem(&a, ScalarReaction::Zero);
    let opts = EstimatorOptions::default();
    let s = space_estimator_scalar(&mesh, &data, &h, &p, &opts).unwrap();
    assert_eq!(s.global, 0.0);
    let t = time_estimator_terms(&mesh, &data, &h, &p.reaction, &opts).unwrap();
    assert_eq!((t.eta1, t.eta2, t.eta3, t.eta4), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn steady_affine_gives_zero() {
    let (mesh, data) = unit_square(5);
    let h = scalar_levels(&mesh, &[0.0, 0.1, 0.2], |x, y, _| 2.0 * x - y + 0.5);
    let a = vec![1.0; mesh.num_triangles()];
    let s = space_estimator_scalar(&mesh, &data, &h, &problem(&a, ScalarReaction::Zero), &EstimatorOptions::default()).unwrap();
    // η is the root of residual·ω, so roundoff in ω enters squared-rooted
    assert!(s.global * s.global < 1e-14, "{}", s.global);
}

#[test]
fn global_is_root_sum_of_squares() {
    let (mesh, data) = unit_square(6);
    let h = scalar_levels(&mesh, &[0.0, 0.01, 0.025, 0.03], |x, y, t| (-(x * x + 2.0 * y * y) * 5.0 - t).exp());
    let a = vec![1.0; mesh.num_triangles()];
    let s = space_estimator_scalar(&mesh, &data, &h, &problem(&a, ScalarReaction::bistable()), &EstimatorOptions::default())
        .unwrap();
    let sum: f64 = s.per_element.iter().map(|v| v * v).sum();
    assert_relative_eq!(s.global * s.global, sum, max_relative = 1e-12);
    assert!(s.edge_part.iter().zip(&s.per_element).all(|(e, p)| e <= p));
}

#[test]
fn missing_history_is_an_error() {
    let (mesh, data) = unit_square(2);
    let h = scalar_levels(&mesh, &[0.0, 0.1, 0.2], |x, _, t| x * t);
    let err = time_estimator_terms(&mesh, &data, &h, &ScalarReaction::Zero, &EstimatorOptions::default()).unwrap_err();
    assert!(matches!(err, Error::History { needed: 4, available: 3 }));
    let h0 = scalar_levels(&mesh, &[0.0], |x, _, _| x);
    let a = vec![1.0; mesh.num_triangles()];
    assert!(space_estimator_scalar(&mesh, &data, &h0, &problem(&a, ScalarReaction::Zero), &EstimatorOptions::default()).is_err());
}

#[test]
fn identical_levels_give_zero_time_terms() {
    let (mesh, data) = unit_square(4);
    let h = scalar_levels(&mesh, &[0.0, 0.1, 0.2, 0.35], |x, y, _| (3.0 * x).sin() * y);
    let t = time_estimator_terms(&mesh, &data, &h, &ScalarReaction::bistable(), &EstimatorOptions::default()).unwrap();
    assert_eq!((t.eta1, t.eta2, t.eta3), (0.0, 0.0, 0.0));
    assert!(t.eta4 < 1e-12);
    assert!(t.modified <= t.total);
}

#[test]
fn constant_reaction_has_no_interpolation_defect() {
    let (mesh, data) = unit_square(4);
    let h = scalar_levels(&mesh, &[0.0, 0.1, 0.2, 0.35], |x, y, t| x * y + t * t * x);
    let t = time_estimator_terms(&mesh, &data, &h, &ScalarReaction::Zero, &EstimatorOptions::default()).unwrap();
    assert_eq!(t.eta4, 0.0);
    // f linear in u is also reproduced exactly by the interpolant of a
    // quadratic-in-time field only up to the quadratic term
    let t = time_estimator_terms(&mesh, &data, &h, &ScalarReaction::Linear { c: 2.0 }, &EstimatorOptions::default()).unwrap();
    assert!(t.eta4 > 0.0);
}

#[test]
fn third_difference_term_at_constant_step() {
    let (mesh, data) = unit_square(4);
    let tau = 0.05;
    let ts = [0.0, tau, 2.0 * tau, 3.0 * tau];
    let h = scalar_levels(&mesh, &ts, |x, y, t| (1.0 + x + y * y) * t * t * t);
    let t = time_estimator_terms(&mesh, &data, &h, &ScalarReaction::Zero, &EstimatorOptions::default()).unwrap();
    // ∂³ is scaled so that ∂³t³ = 6
    let d3: Vec<f64> = mesh.vertices().iter().map(|p| 6.0 * (1.0 + p[0] + p[1] * p[1])).collect();
    let expected = (tau.powi(5) / 12.0).sqrt() * l2_sq(&mesh, &data, &d3).sqrt();
    assert_relative_eq!(t.eta3, expected, max_relative = 1e-8);
}

#[test]
fn modified_total_is_bitwise_root_sum() {
    let (mesh, data) = unit_square(5);
    let h = scalar_levels(&mesh, &[0.0, 0.02, 0.035, 0.05, 0.07], |x, y, t| (-(x * x + y * y) * 10.0 * (1.0 + t)).exp());
    let t = time_estimator_terms(&mesh, &data, &h, &ScalarReaction::bistable(), &EstimatorOptions::default()).unwrap();
    assert_eq!(t.modified, (t.eta1 * t.eta1 + t.eta2 * t.eta2 + t.eta4 * t.eta4).sqrt());
    assert!(t.modified <= t.total);
}

// Independent evaluation on the two-element unit square: Lagrange
// reconstruction in time, dense centroid sampling in space, hand-computed
// element gradients, vertex recovery and flux jumps.
struct Oracle<'a> {
    mesh: &'a Mesh,
    data: &'a MeshData,
}

impl Oracle<'_> {
    fn grad(&self, k: usize, v: &[f64]) -> [f64; 2] {
        let [a, b, c] = self.mesh.triangle_points(k);
        let t = self.mesh.triangles()[k];
        let (e1, e2) = ([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
        let (d1, d2) = (v[t[1]] - v[t[0]], v[t[2]] - v[t[0]]);
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        [(d1 * e2[1] - d2 * e1[1]) / det, (e1[0] * d2 - e2[0] * d1) / det]
    }

    // centroid samples of an m×m subdivision in barycentric coordinates
    fn samples(m: usize) -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        let h = 1.0 / m as f64;
        for i in 0..m {
            for j in 0..m - i {
                out.push([(i as f64 + 1.0 / 3.0) * h, (j as f64 + 1.0 / 3.0) * h]);
                if i + j + 1 < m {
                    out.push([(i as f64 + 2.0 / 3.0) * h, (j as f64 + 2.0 / 3.0) * h]);
                }
            }
        }
        out.into_iter().map(|[a, b]| [a, b, 1.0 - a - b]).collect()
    }

    fn value(&self, k: usize, b: &[f64; 3], v: &[f64]) -> f64 {
        let t = self.mesh.triangles()[k];
        b[0] * v[t[0]] + b[1] * v[t[1]] + b[2] * v[t[2]]
    }

    fn omega(&self, v: &[f64]) -> Vec<f64> {
        let nt = self.mesh.num_triangles();
        let grads: Vec<_> = (0..nt).map(|k| self.grad(k, v)).collect();
        let mut rec = vec![[0.0; 2]; self.mesh.num_vertices()];
        let mut wsum = vec![0.0; self.mesh.num_vertices()];
        for k in 0..nt {
            for &i in &self.mesh.triangles()[k] {
                let a = self.mesh.triangle_area(k);
                rec[i][0] += a * grads[k][0];
                rec[i][1] += a * grads[k][1];
                wsum[i] += a;
            }
        }
        for i in 0..rec.len() {
            rec[i] = [rec[i][0] / wsum[i], rec[i][1] / wsum[i]];
        }
        let pts = Self::samples(120);
        let e: Vec<[f64; 3]> = (0..nt)
            .map(|k| {
                let t = self.mesh.triangles()[k];
                let mut s = [0.0; 3];
                for b in &pts {
                    let px = b[0] * rec[t[0]][0] + b[1] * rec[t[1]][0] + b[2] * rec[t[2]][0];
                    let py = b[0] * rec[t[0]][1] + b[1] * rec[t[1]][1] + b[2] * rec[t[2]][1];
                    let d = [grads[k][0] - px, grads[k][1] - py];
                    s[0] += d[0] * d[0];
                    s[1] += d[0] * d[1];
                    s[2] += d[1] * d[1];
                }
                let w = self.mesh.triangle_area(k) / pts.len() as f64;
                [s[0] * w, s[1] * w, s[2] * w]
            })
            .collect();
        // on two elements every patch is the whole mesh
        let g = [e[0][0] + e[1][0], e[0][1] + e[1][1], e[0][2] + e[1][2]];
        (0..nt)
            .map(|k| {
                let f = &self.data.frames[k];
                let q = |r: [f64; 2]| g[0] * r[0] * r[0] + 2.0 * g[1] * r[0] * r[1] + g[2] * r[1] * r[1];
                (f.lambda1 * f.lambda1 * q(f.r1) + f.lambda2 * f.lambda2 * q(f.r2)).sqrt()
            })
            .collect()
    }
}

fn lagrange(ts: [f64; 3], vs: [&[f64]; 3], t: f64) -> (Vec<f64>, Vec<f64>) {
    let l = |i: usize| {
        let (a, b) = ((i + 1) % 3, (i + 2) % 3);
        let v = (t - ts[a]) * (t - ts[b]) / ((ts[i] - ts[a]) * (ts[i] - ts[b]));
        let d = ((t - ts[a]) + (t - ts[b])) / ((ts[i] - ts[a]) * (ts[i] - ts[b]));
        (v, d)
    };
    let n = vs[0].len();
    let mut val = vec![0.0; n];
    let mut der = vec![0.0; n];
    for i in 0..3 {
        let (c, d) = l(i);
        for j in 0..n {
            val[j] += c * vs[i][j];
            der[j] += d * vs[i][j];
        }
    }
    (val, der)
}

const TWO_ELEMENT_LEVELS: [[f64; 4]; 3] = [[0.1, 0.4, 0.9, 0.3], [0.2, 0.5, 0.7, 0.35], [0.15, 0.6, 0.8, 0.5]];

#[test]
fn two_element_space_estimator_matches_oracle() {
    let (mesh, data) = unit_square(1);
    let ts = [0.0, 0.01, 0.025];
    let lv: Vec<_> = ts.iter().zip(TWO_ELEMENT_LEVELS).map(|(&t, u)| (t, u.to_vec(), None)).collect();
    let h = history(&mesh, &lv);
    let a = [1.0, 3.0];
    let reaction = ScalarReaction::bistable();
    let opts = EstimatorOptions { subdivisions: 2, ..Default::default() };
    let s = space_estimator_scalar(&mesh, &data, &h, &problem(&a, reaction), &opts).unwrap();

    let o = Oracle { mesh: &mesh, data: &data };
    let vs = [&TWO_ELEMENT_LEVELS[0][..], &TWO_ELEMENT_LEVELS[1][..], &TWO_ELEMENT_LEVELS[2][..]];
    let (_, gear) = lagrange(ts, vs, ts[2]);
    let tau = ts[2] - ts[1];
    let pts = Oracle::samples(200);
    let mut sq = [0.0; 2];
    for (x, w) in GL3 {
        let t = ts[1] + x * tau;
        let (uq, _) = lagrange(ts, vs, t);
        let lin: Vec<f64> = (0..4).map(|i| vs[1][i] + (vs[2][i] - vs[1][i]) * x).collect();
        let om = o.omega(&uq);
        let g0 = o.grad(0, &lin);
        let g1 = o.grad(1, &lin);
        // element 0 = (0,0),(1,0),(1,1); element 1 = (0,0),(1,1),(0,1)
        let n = [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2];
        let jump = a[0] * (g0[0] * n[0] + g0[1] * n[1]) - a[1] * (g1[0] * n[0] + g1[1] * n[1]);
        let diag = 2f64.sqrt();
        let r0 = diag * jump * jump + 4.0 * (a[0] * g0[1]).powi(2) + 4.0 * (a[0] * g0[0]).powi(2);
        let r1 = diag * jump * jump + 4.0 * (a[1] * g1[1]).powi(2) + 4.0 * (a[1] * g1[0]).powi(2);
        for (k, rk) in [r0, r1].into_iter().enumerate() {
            let mut res = 0.0;
            for b in &pts {
                let r = reaction.value(o.value(k, b, &uq)) + o.value(k, b, &gear);
                res += r * r;
            }
            let res = (res * 0.5 / pts.len() as f64).sqrt();
            let f = &data.frames[k];
            let edge = 0.5 * (f.h / (f.lambda1 * f.lambda2)).sqrt() * rk.sqrt();
            sq[k] += w * tau * (res + edge) * om[k];
        }
    }
    for k in 0..2 {
        assert_relative_eq!(s.per_element[k], sq[k].sqrt(), max_relative = 2e-5);
    }
    // frozen from the oracle above
    assert_relative_eq!(s.per_element[0], 0.7957281662, max_relative = 1e-6);
    assert_relative_eq!(s.per_element[1], 0.9245609189, max_relative = 1e-6);
}

#[test]
fn two_element_omega_matches_oracle() {
    let (mesh, data) = unit_square(1);
    let ts = [0.0, 0.5, 1.25];
    let u = vec![0.0; 4];
    let lv: Vec<_> = ts.iter().zip(TWO_ELEMENT_LEVELS).map(|(&t, w)| (t, u.clone(), Some(w.to_vec()))).collect();
    let h = history(&mesh, &lv);
    let (_, om) = monodomain_space_estimators(&mesh, &data, &h, &IonicModel::fhn_default(), 1.0, &EstimatorOptions::default()).unwrap();
    let o = Oracle { mesh: &mesh, data: &data };
    let vs = [&TWO_ELEMENT_LEVELS[0][..], &TWO_ELEMENT_LEVELS[1][..], &TWO_ELEMENT_LEVELS[2][..]];
    let best = GL3
        .iter()
        .map(|(x, _)| {
            let (wq, _) = lagrange(ts, vs, ts[1] + x * (ts[2] - ts[1]));
            o.omega(&wq).iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);
    assert_relative_eq!(om.global, best, max_relative = 1e-4);
    assert_relative_eq!(om.global, 0.2367432778, max_relative = 1e-6);
}

#[test]
fn affine_w_gives_zero_omega_and_uniform_states_give_zero() {
    let (mesh, data) = unit_square(4);
    let ts = [0.0, 0.5, 1.0, 1.4];
    let lv: Vec<_> = ts
        .iter()
        .map(|&t| {
            let w = mesh.vertices().iter().map(|p| 0.2 + p[0] - 0.3 * p[1] + t).collect();
            (t, vec![0.0; mesh.num_vertices()], Some(w))
        })
        .collect();
    let h = history(&mesh, &lv);
    let (_, om) = monodomain_space_estimators(&mesh, &data, &h, &IonicModel::fhn_default(), 1.0, &EstimatorOptions::default()).unwrap();
    assert!(om.global < 1e-12);

    let lv: Vec<_> = ts.iter().map(|&t| (t, vec![0.0; mesh.num_vertices()], Some(vec![0.0; mesh.num_vertices()]))).collect();
    let h = history(&mesh, &lv);
    let model = IonicModel::fhn_default();
    let (s, om) = monodomain_space_estimators(&mesh, &data, &h, &model, 1.0, &EstimatorOptions::default()).unwrap();
    assert_eq!((s.global, om.global), (0.0, 0.0));
    let t = monodomain_time_estimators(&mesh, &data, &h, &model, &EstimatorOptions::default()).unwrap();
    assert_eq!((t.total_u, t.total_w), (0.0, 0.0));
}

#[test]
fn frozen_u_linear_g_matches_scalar_defect() {
    let (mesh, data) = unit_square(4);
    let ts = [0.0, 0.3, 0.5, 0.9];
    let wf = |x: f64, y: f64, t: f64| (x + 2.0 * y) * (1.0 + t * t) + t.sin();
    let u: Vec<f64> = mesh.vertices().iter().map(|p| 0.3 * p[0]).collect();
    let lv: Vec<_> = ts
        .iter()
        .map(|&t| (t, u.clone(), Some(mesh.vertices().iter().map(|p| wf(p[0], p[1], t)).collect())))
        .collect();
    let h = history(&mesh, &lv);
    let model = IonicModel::fhn_default();
    let mono = monodomain_time_estimators(&mesh, &data, &h, &model, &EstimatorOptions::default()).unwrap();
    // G = −ε(κu − w): with u frozen only ε·w varies in time
    let hw = scalar_levels(&mesh, &ts, |x, y, t| wf(x, y, t));
    let scalar = time_estimator_terms(&mesh, &data, &hw, &ScalarReaction::Linear { c: 0.01 }, &EstimatorOptions::default()).unwrap();
    assert_relative_eq!(mono.eta4_w, scalar.eta4, max_relative = 1e-9);
    assert_eq!(mono.eta3_u, 0.0);
}

#[test]
fn interpolation_defect_matches_refined_quadrature() {
    let (mesh, data) = unit_square(2);
    let ts = [0.0, 0.2, 0.45, 0.6];
    let lv: Vec<_> = ts
        .iter()
        .map(|&t| {
            let u = mesh.vertices().iter().map(|p| (p[0] + t).sin() * (1.0 + p[1] * t)).collect();
            let w = mesh.vertices().iter().map(|p| 0.5 + 0.3 * (p[1] - t * p[0]).cos()).collect();
            (t, u, Some(w))
        })
        .collect();
    let h = history(&mesh, &lv);
    let model = IonicModel::fhn_default();
    let opts = EstimatorOptions { time_points: 5, subdivisions: 2, ..Default::default() };
    let mono = monodomain_time_estimators(&mesh, &data, &h, &model, &opts).unwrap();

    let o = Oracle { mesh: &mesh, data: &data };
    let ulv: Vec<&[f64]> = (0..3).map(|j| h.level(2 - j).u.as_slice()).collect();
    let wlv: Vec<&[f64]> = (0..3).map(|j| h.level(2 - j).get(Var::W)).collect();
    let t3 = [ts[1], ts[2], ts[3]];
    let gl5 = rdadapt::quadrature::gauss_legendre(5).unwrap();
    let pts = Oracle::samples(120);
    let tau = ts[3] - ts[2];
    let mut total = 0.0;
    for (x, w) in gl5 {
        let t = ts[2] + x * tau;
        let (uq, _) = lagrange(t3, [ulv[0], ulv[1], ulv[2]], t);
        let (wq, _) = lagrange(t3, [wlv[0], wlv[1], wlv[2]], t);
        for k in 0..mesh.num_triangles() {
            let mut acc = 0.0;
            for b in &pts {
                let f = model.eval(o.value(k, b, &uq), o.value(k, b, &wq)).f;
                let fm = model.eval(o.value(k, b, ulv[1]), o.value(k, b, wlv[1])).f;
                let fnn = model.eval(o.value(k, b, ulv[2]), o.value(k, b, wlv[2])).f;
                let d = f - ((1.0 - x) * fm + x * fnn);
                acc += d * d;
            }
            total += w * tau * acc * mesh.triangle_area(k) / pts.len() as f64;
        }
    }
    assert_relative_eq!(mono.eta4_u, total.sqrt(), max_relative = 1e-4);
    assert_relative_eq!(mono.eta4_u, 0.003940667431, max_relative = 1e-6);
}

#[test]
fn energy_norm_examples() {
    let (mesh, data) = unit_square(4);
    let phi: Vec<f64> = mesh.vertices().iter().map(|p| p[0] + 2.0 * p[1]).collect();
    // |φ|₁² = 5 on the unit square
    let h = history(&mesh, &[(0.0, phi.clone(), None), (0.3, phi.clone(), None)]);
    let opts = EstimatorOptions::default();
    assert_relative_eq!(energy_norm_interval(&mesh, &data, &h, Var::U, &opts).unwrap(), 5f64.sqrt() * 0.3f64.sqrt(), max_relative = 1e-13);
    let zero = history(&mesh, &[(0.0, vec![0.0; phi.len()], None), (0.3, vec![0.0; phi.len()], None)]);
    assert_eq!(energy_norm_interval(&mesh, &data, &zero, Var::U, &opts).unwrap(), 0.0);
    let floored = EstimatorOptions { norm_floor: Some(1.0), ..opts };
    assert_relative_eq!(energy_norm_interval(&mesh, &data, &zero, Var::U, &floored).unwrap(), 0.3f64.sqrt(), max_relative = 1e-14);
    // v(t) = (1 + 2t)φ on [0.3, 0.8]: ∫ 5(1 + 2t)² dt
    let (t0, t1) = (0.3, 0.8);
    let h = history(&mesh, &[
        (t0, phi.iter().map(|v| v * (1.0 + 2.0 * t0)).collect(), None),
        (t1, phi.iter().map(|v| v * (1.0 + 2.0 * t1)).collect(), None),
    ]);
    let exact = 5.0 * ((1.0 + 2.0 * t1).powi(3) - (1.0 + 2.0 * t0).powi(3)) / 6.0;
    assert_relative_eq!(energy_norm_interval(&mesh, &data, &h, Var::U, &opts).unwrap(), exact.sqrt(), max_relative = 1e-13);
}

#[test]
fn effectivity_examples() {
    let err = ReferenceErrors { energy: 1.0, w_l2: None };
    let e = effectivity_indices(2.0, 0.0, None, &err).unwrap();
    assert_eq!((e.ei_s, e.ei), (2.0, 2.0));
    let e = effectivity_indices(3.0, 4.0, None, &ReferenceErrors { energy: 2.0, w_l2: None }).unwrap();
    assert_eq!((e.ei, e.ei_s, e.ei_t), (2.5, 1.5, 2.0));
    let e = effectivity_indices(1.0, 0.0, Some(0.5), &ReferenceErrors { energy: 1.0, w_l2: Some(0.25) }).unwrap();
    assert_eq!(e.ei_sw, Some(2.0));
    assert!(matches!(effectivity_indices(1.0, 1.0, None, &ReferenceErrors { energy: 0.0, w_l2: None }), Err(Error::UndefinedIndex(_))));
}

#[test]
fn report_accumulates_into_totals() {
    let (mesh, data) = unit_square(4);
    let h = scalar_levels(&mesh, &[0.0, 0.01, 0.02, 0.03], |x, y, t| (-(x * x + y * y) * 8.0).exp() * (1.0 - t));
    let a = vec![1.0; mesh.num_triangles()];
    let r = scalar_report(&mesh, &data, &h, &problem(&a, ScalarReaction::bistable()), &EstimatorOptions::default()).unwrap();
    assert_eq!(r.step, 3);
    assert_eq!(r.elements, 32);
    let mut g = GlobalEstimates::default();
    g.add(&r);
    g.add(&r);
    assert_relative_eq!(g.eta_s(), 2f64.sqrt() * r.space.global, max_relative = 1e-14);
    let Some(TimeReport::Scalar(t)) = r.time else { panic!("time terms missing") };
    assert_relative_eq!(g.eta_t(), 2f64.sqrt() * t.total, max_relative = 1e-14);
    assert_eq!(r.time_rel(), vec![t.modified / r.norm_u]);
}
