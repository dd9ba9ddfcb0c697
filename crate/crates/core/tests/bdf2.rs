use approx::assert_relative_eq;
use rdadapt::bdf2::{bdf2_monodomain_step, bdf2_scalar_step, Level, NewtonOptions, SystemOperators, TimeHistory};
use rdadapt::fem::{assemble_operators, interpolate_nodal};
use rdadapt::mesh::generate_uniform_mesh;
use rdadapt::{DiffusionCoefficient, IonicModel, Mesh, MeshData, Operators, Rect, ScalarReaction};

fn setup(n: usize) -> (Mesh, MeshData, Operators) {
    let mesh = generate_uniform_mesh(n, n, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
    let data = MeshData::new(&mesh).unwrap();
    let ops = assemble_operators(&mesh, &data, &DiffusionCoefficient::Constant(1.0)).unwrap();
    (mesh, data, ops)
}

fn sys<'a>(ops: &'a Operators, data: &'a MeshData) -> SystemOperators<'a> {
    SystemOperators { mass: &ops.mass, stiffness: Some(&ops.stiffness), lumped: &data.lumped, solver: None }
}

#[test]
fn constant_state_is_steady() {
    let (mesh, data, ops) = setup(4);
    let u0 = vec![0.3; mesh.num_vertices()];
    let mut h = TimeHistory::new(Level { t: 0.0, u: u0, w: None }, mesh.generation(), 4);
    for step in 1..=4 {
        let (u, _) = bdf2_scalar_step(&h, &sys(&ops, &data), &ScalarReaction::Zero, None, 0.01, &NewtonOptions::default()).unwrap();
        for v in &u {
            assert_relative_eq!(*v, 0.3, max_relative = 1e-12);
        }
        h.push(Level { t: 0.01 * step as f64, u, w: None });
    }
}

#[test]
fn pure_neumann_heat_conserves_mass() {
    let (mesh, data, ops) = setup(8);
    let u0 = interpolate_nodal(&mesh, |x, y| (-30.0 * (x * x + y * y)).exp()).unwrap().values;
    let mass0: f64 = ops.mass.mul(&u0).iter().sum();
    let mut h = TimeHistory::new(Level { t: 0.0, u: u0, w: None }, mesh.generation(), 4);
    let taus = [0.01, 0.013, 0.008, 0.02];
    let mut t = 0.0;
    for tau in taus {
        let (u, _) = bdf2_scalar_step(&h, &sys(&ops, &data), &ScalarReaction::Zero, None, tau, &NewtonOptions::default()).unwrap();
        let m: f64 = ops.mass.mul(&u).iter().sum();
        assert_relative_eq!(m, mass0, max_relative = 1e-9);
        t += tau;
        h.push(Level { t, u, w: None });
    }
}

#[test]
fn fhn_rest_state_stays_at_rest() {
    let (mesh, data, ops) = setup(4);
    let nv = mesh.num_vertices();
    let mut h = TimeHistory::new(Level { t: 0.0, u: vec![0.0; nv], w: Some(vec![0.0; nv]) }, mesh.generation(), 4);
    for step in 1..=3 {
        let (u, w, _) =
            bdf2_monodomain_step(&h, &sys(&ops, &data), &IonicModel::fhn_default(), 1.0, 0.5, &NewtonOptions::default()).unwrap();
        assert!(u.iter().chain(&w).all(|v| *v == 0.0));
        h.push(Level { t: 0.5 * step as f64, u, w: Some(w) });
    }
}

/// Backward Euler then BDF2 for the two-variable ODE, with a dense 2×2
/// Newton solve per step.
fn ode_oracle(model: &IonicModel, u0: f64, w0: f64, taus: &[f64]) -> Vec<(f64, f64)> {
    let mut out = vec![(u0, w0)];
    for (n, &tau) in taus.iter().enumerate() {
        let (c0, hu, hw) = if n == 0 {
            (1.0 / tau, -out[0].0 / tau, -out[0].1 / tau)
        } else {
            let g = tau / taus[n - 1];
            let (a, b, c) = ((1.0 + 2.0 * g) / (1.0 + g) / tau, -(1.0 + g) / tau, g * g / (1.0 + g) / tau);
            let (p, q) = (out[n], out[n - 1]);
            (a, b * p.0 + c * q.0, b * p.1 + c * q.1)
        };
        let (mut u, mut w) = out[n];
        for _ in 0..50 {
            let e = model.eval(u, w);
            let (r1, r2) = (c0 * u + hu + e.f, c0 * w + hw + e.g);
            let (a11, a12, a21, a22) = (c0 + e.f_u, e.f_w, e.g_u, c0 + e.g_w);
            let det = a11 * a22 - a12 * a21;
            u -= (a22 * r1 - a12 * r2) / det;
            w -= (a11 * r2 - a21 * r1) / det;
            if r1.abs() + r2.abs() < 1e-15 {
                break;
            }
        }
        out.push((u, w));
    }
    out
}

#[test]
fn uniform_data_follows_the_pointwise_ode() {
    let (mesh, data, ops) = setup(3);
    let nv = mesh.num_vertices();
    for model in [IonicModel::fhn_default(), IonicModel::ms_default()] {
        let (u0, w0) = (0.4, 0.8);
        let taus = [0.05, 0.05, 0.07, 0.04, 0.06];
        let oracle = ode_oracle(&model, u0, w0, &taus);
        let mut h = TimeHistory::new(Level { t: 0.0, u: vec![u0; nv], w: Some(vec![w0; nv]) }, mesh.generation(), 4);
        let mut t = 0.0;
        let opts = NewtonOptions { tol: 1e-13, ..Default::default() };
        for (n, &tau) in taus.iter().enumerate() {
            let (u, w, _) = bdf2_monodomain_step(&h, &sys(&ops, &data), &model, 2.0, tau, &opts).unwrap();
            let (eu, ew) = oracle[n + 1];
            for i in 0..nv {
                assert_relative_eq!(u[i], eu, max_relative = 1e-9);
                assert_relative_eq!(w[i], ew, max_relative = 1e-9);
            }
            t += tau;
            h.push(Level { t, u, w: Some(w) });
        }
    }
}

#[test]
fn fhn_newton_converges_quadratically() {
    let (mesh, data, ops) = setup(16);
    let u0 = interpolate_nodal(&mesh, |x, y| if x * x + y * y < 0.1 { 1.0 } else { 0.0 }).unwrap().values;
    let nv = mesh.num_vertices();
    let h = TimeHistory::new(Level { t: 0.0, u: u0, w: Some(vec![0.0; nv]) }, mesh.generation(), 4);
    let opts = NewtonOptions { tol: 1e-14, ..Default::default() };
    let (_, _, stats) = bdf2_monodomain_step(&h, &sys(&ops, &data), &IonicModel::fhn_default(), 1e-3, 0.5, &opts).unwrap();
    let r = &stats.residuals;
    assert!(r.len() >= 3, "{r:?}");
    // the last contraction before hitting roundoff
    let k = (1..r.len()).rev().find(|&k| r[k] > 1e-13).unwrap_or(1);
    if k >= 1 && r[k - 1] < 1e-2 {
        assert!(r[k] <= 10.0 * r[k - 1] * r[k - 1], "{r:?}");
    }
    assert!(*r.last().unwrap() <= 1e-14);
}

#[test]
fn newton_failure_is_reported() {
    let (mesh, data, ops) = setup(2);
    let u0 = vec![50.0; mesh.num_vertices()];
    let h = TimeHistory::new(Level { t: 0.0, u: u0, w: None }, mesh.generation(), 4);
    let opts = NewtonOptions { max_iter: 1, ..Default::default() };
    let r = bdf2_scalar_step(&h, &sys(&ops, &data), &ScalarReaction::bistable(), None, 1.0, &opts);
    assert!(matches!(r, Err(rdadapt::Error::NewtonDivergence { .. })));
}
