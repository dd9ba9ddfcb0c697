use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rdadapt::adapt::{remesh_to_metric, RemeshConfig};
use rdadapt::bdf2::{Level, TimeHistory};
use rdadapt::estimators::{scalar_report, EstimatorOptions, ScalarProblem};
use rdadapt::fem::assemble_operators;
use rdadapt::mesh::generate_uniform_mesh;
use rdadapt::{DiffusionCoefficient, Mesh, MeshData, Metric, MetricField, Rect, ScalarReaction, Sym2};

fn unit(n: usize) -> (Mesh, MeshData) {
    let mesh = generate_uniform_mesh(n, n, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
    let data = MeshData::new(&mesh).unwrap();
    (mesh, data)
}

fn front(mesh: &Mesh, t: f64) -> Vec<f64> {
    mesh.vertices().iter().map(|p| (20.0 * (p[0] + 0.5 * p[1] - 0.5 - t)).tanh()).collect()
}

fn assembly(c: &mut Criterion) {
    let (mesh, data) = unit(64);
    c.bench_function("assemble_64", |b| {
        b.iter(|| assemble_operators(black_box(&mesh), &data, &DiffusionCoefficient::Constant(1.0)).unwrap())
    });
}

fn estimators(c: &mut Criterion) {
    let (mesh, data) = unit(64);
    let mut h = TimeHistory::new(Level { t: 0.0, u: front(&mesh, 0.0), w: None }, mesh.generation(), 6);
    for t in [0.01, 0.02, 0.03] {
        h.push(Level { t, u: front(&mesh, t), w: None });
    }
    let a = vec![1.0; mesh.num_triangles()];
    let p = ScalarProblem { reaction: ScalarReaction::bistable(), diffusion: &a, source: None, flux: None };
    let opts = EstimatorOptions::default();
    c.bench_function("scalar_report_64", |b| {
        b.iter(|| scalar_report(black_box(&mesh), &data, &h, &p, &opts).unwrap())
    });
}

fn remesh(c: &mut Criterion) {
    let (mesh, _) = unit(16);
    let h: f64 = 1.0 / 32.0;
    let m = Metric::new(Sym2::new(h.powi(-2), 0.0, h.powi(-2))).unwrap();
    let metric = MetricField::new(&mesh, vec![m; mesh.num_vertices()]).unwrap();
    let cfg = RemeshConfig { h_min: 1e-3, h_max: 0.5, ..Default::default() };
    c.bench_function("remesh_halve_16", |b| b.iter(|| remesh_to_metric(black_box(&mesh), &metric, &cfg).unwrap()));
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = assembly, estimators, remesh
}
criterion_main!(kernels);
