//! P1 finite elements: assembly, interpolation, transfer between meshes,
//! gradient recovery, recovered-gradient matrices and edge jumps.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{element_frame, ElementFrame, Sym2};
use crate::linalg::CsrMatrix;
use crate::mesh::{build_adjacency, locate_point, Adjacency, Mesh, Point, NONE};
use crate::models::DiffusionCoefficient;
use crate::textio::{fmt_f64, Tokens};

/// Nodal coefficients of a P1 function, stamped with its mesh generation.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
    pub generation: u64,
}

impl NodalField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        Ok(Self { values, generation: mesh.generation() })
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.generation != mesh.generation() || self.values.len() != mesh.num_vertices() {
            return Err(Error::Stale { field: self.generation, mesh: mesh.generation() });
        }
        Ok(())
    }
}

/// Per-mesh geometric data shared by assembly and the estimators.
#[derive(Clone, Debug)]
pub struct MeshData {
    pub generation: u64,
    pub adjacency: Adjacency,
    pub area: Vec<f64>,
    /// Gradients of the three barycentric basis functions.
    pub grad: Vec<[[f64; 2]; 3]>,
    pub frames: Vec<ElementFrame>,
    pub barycenter: Vec<Point>,
    /// Lumped mass: one third of the incident triangle areas.
    pub lumped: Vec<f64>,
    /// Edge length, indexed like `adjacency.edges()`.
    pub edge_length: Vec<f64>,
    /// Unit normal of each edge pointing out of its first triangle.
    pub edge_normal: Vec<[f64; 2]>,
    patch_offsets: Vec<usize>,
    patch_list: Vec<usize>,
}

impl MeshData {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let adjacency = build_adjacency(mesh)?;
        let nt = mesh.num_triangles();
        let mut area = Vec::with_capacity(nt);
        let mut grad = Vec::with_capacity(nt);
        let mut frames = Vec::with_capacity(nt);
        let mut barycenter = Vec::with_capacity(nt);
        let mut lumped = vec![0.0; mesh.num_vertices()];
        for k in 0..nt {
            let p = mesh.triangle_points(k);
            let frame = element_frame(p).map_err(|e| match e {
                Error::DegenerateElement { area, .. } => Error::DegenerateElement { index: k, area },
                e => e,
            })?;
            let a = frame.area;
            let mut g = [[0.0; 2]; 3];
            for i in 0..3 {
                let (pj, pk) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                g[i] = [(pj[1] - pk[1]) / (2.0 * a), (pk[0] - pj[0]) / (2.0 * a)];
            }
            for &v in &mesh.triangles()[k] {
                lumped[v] += a / 3.0;
            }
            area.push(a);
            grad.push(g);
            frames.push(frame);
            barycenter.push([(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]);
        }
        let verts = mesh.vertices();
        let mut edge_length = Vec::with_capacity(adjacency.edges().len());
        let mut edge_normal = Vec::with_capacity(adjacency.edges().len());
        for e in adjacency.edges() {
            let (a, b) = (verts[e.v[0]], verts[e.v[1]]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let len = d[0].hypot(d[1]);
            let mut n = [d[1] / len, -d[0] / len];
            // orient away from the first triangle's barycenter
            let c = barycenter[e.tris[0]];
            if (a[0] - c[0]) * n[0] + (a[1] - c[1]) * n[1] < 0.0 {
                n = [-n[0], -n[1]];
            }
            edge_length.push(len);
            edge_normal.push(n);
        }
        let mut patch_offsets = Vec::with_capacity(nt + 1);
        let mut patch_list = Vec::new();
        patch_offsets.push(0);
        let mut scratch = Vec::new();
        for t in mesh.triangles() {
            scratch.clear();
            for &v in t {
                scratch.extend_from_slice(adjacency.vertex_triangles(v));
            }
            scratch.sort_unstable();
            scratch.dedup();
            patch_list.extend_from_slice(&scratch);
            patch_offsets.push(patch_list.len());
        }
        Ok(Self {
            generation: mesh.generation(),
            adjacency,
            area,
            grad,
            frames,
            barycenter,
            lumped,
            edge_length,
            edge_normal,
            patch_offsets,
            patch_list,
        })
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.generation != mesh.generation() {
            return Err(Error::Stale { field: self.generation, mesh: mesh.generation() });
        }
        Ok(())
    }

    /// Vertex patch of triangle `k`.
    pub fn patch(&self, k: usize) -> &[usize] {
        &self.patch_list[self.patch_offsets[k]..self.patch_offsets[k + 1]]
    }

    pub fn num_triangles(&self) -> usize {
        self.area.len()
    }

    /// Constant gradient of `u` on triangle `k`.
    pub fn gradient(&self, mesh: &Mesh, k: usize, u: &[f64]) -> [f64; 2] {
        let t = mesh.triangles()[k];
        let g = &self.grad[k];
        [
            g[0][0] * u[t[0]] + g[1][0] * u[t[1]] + g[2][0] * u[t[2]],
            g[0][1] * u[t[0]] + g[1][1] * u[t[1]] + g[2][1] * u[t[2]],
        ]
    }

    pub fn gradients(&self, mesh: &Mesh, u: &[f64]) -> Vec<[f64; 2]> {
        (0..self.num_triangles()).map(|k| self.gradient(mesh, k, u)).collect()
    }
}

/// Mass and stiffness matrices plus the elementwise diffusion values.
#[derive(Clone, Debug)]
pub struct Operators {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    /// Diffusion coefficient frozen at each barycenter.
    pub diffusion: Vec<f64>,
}

fn vertex_pattern(mesh: &Mesh, adjacency: &Adjacency) -> CsrMatrix {
    let rows = (0..mesh.num_vertices())
        .map(|v| {
            adjacency
                .vertex_triangles(v)
                .iter()
                .flat_map(|&k| mesh.triangles()[k].iter().copied())
                .collect()
        })
        .collect();
    CsrMatrix::from_pattern(rows)
}

/// Exact P1 mass and stiffness matrices with `A` frozen at barycenters.
pub fn assemble_operators(mesh: &Mesh, data: &MeshData, diffusion: &DiffusionCoefficient) -> Result<Operators> {
    data.check(mesh)?;
    let mut mass = vertex_pattern(mesh, &data.adjacency);
    let mut stiffness = mass.zeros_like();
    let mut coeff = Vec::with_capacity(mesh.num_triangles());
    for (k, t) in mesh.triangles().iter().enumerate() {
        let [x, y] = data.barycenter[k];
        let a = diffusion.value(x, y);
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidCoefficient { value: a, x, y });
        }
        coeff.push(a);
        let area = data.area[k];
        let g = &data.grad[k];
        for i in 0..3 {
            for j in 0..3 {
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                mass.add(t[i], t[j], m);
                stiffness.add(t[i], t[j], a * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
            }
        }
    }
    Ok(Operators { mass, stiffness, diffusion: coeff })
}

/// Lagrange interpolant of `f`.
pub fn interpolate_nodal(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Result<NodalField> {
    let mut values = Vec::with_capacity(mesh.num_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let v = f(p[0], p[1]);
        if !v.is_finite() {
            return Err(Error::Evaluation { vertex: i, value: v });
        }
        values.push(v);
    }
    NodalField::new(mesh, values)
}

/// Interpolates several fields from `old` onto the vertices of `new`.
pub fn transfer_fields(old: &Mesh, old_adj: &Adjacency, fields: &[&[f64]], new: &Mesh) -> Result<Vec<Vec<f64>>> {
    old_adj.check(old)?;
    for f in fields {
        if f.len() != old.num_vertices() {
            return Err(Error::InvalidArgument("field length does not match the source mesh".into()));
        }
    }
    let mut out: Vec<Vec<f64>> = fields.iter().map(|_| Vec::with_capacity(new.num_vertices())).collect();
    let mut seed = None;
    for (i, &p) in new.vertices().iter().enumerate() {
        let loc = locate_point(old, old_adj, p, seed)
            .map_err(|e| Error::Transfer { vertex: i, reason: e.to_string() })?;
        seed = Some(loc.triangle);
        for (o, f) in out.iter_mut().zip(fields) {
            o.push(loc.eval(old, f));
        }
    }
    Ok(out)
}

pub fn transfer_solution(old: &Mesh, old_adj: &Adjacency, field: &NodalField, new: &Mesh) -> Result<NodalField> {
    field.check(old)?;
    let mut v = transfer_fields(old, old_adj, &[&field.values], new)?;
    NodalField::new(new, v.pop().expect("one field"))
}

/// Recovered gradient, one vector per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredGradient {
    pub values: Vec<[f64; 2]>,
    pub generation: u64,
}

/// Area-weighted average of the elementwise gradients around each vertex.
pub fn recover_from_gradients(mesh: &Mesh, data: &MeshData, grads: &[[f64; 2]]) -> RecoveredGradient {
    let mut num = vec![[0.0; 2]; mesh.num_vertices()];
    let mut den = vec![0.0; mesh.num_vertices()];
    for (k, t) in mesh.triangles().iter().enumerate() {
        let a = data.area[k];
        for &v in t {
            num[v][0] += a * grads[k][0];
            num[v][1] += a * grads[k][1];
            den[v] += a;
        }
    }
    let values = num.iter().zip(&den).map(|(n, &d)| [n[0] / d, n[1] / d]).collect();
    RecoveredGradient { values, generation: mesh.generation() }
}

pub fn recover_gradient(mesh: &Mesh, data: &MeshData, u: &[f64]) -> RecoveredGradient {
    recover_from_gradients(mesh, data, &data.gradients(mesh, u))
}

/// `E_K = ∫_K (∇u − Π)(∇u − Π)ᵀ` for every element, `Π` linear on `K`.
pub fn element_error_matrices(mesh: &Mesh, data: &MeshData, grads: &[[f64; 2]], pi: &RecoveredGradient) -> Vec<Sym2> {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let g = grads[k];
            let mut s = Sym2::ZERO;
            // edge midpoints: exact for the quadratic integrand
            for i in 0..3 {
                let (a, b) = (pi.values[t[i]], pi.values[t[(i + 1) % 3]]);
                let d = [g[0] - 0.5 * (a[0] + b[0]), g[1] - 0.5 * (a[1] + b[1])];
                s = s.add(&Sym2::outer(d));
            }
            s.scale(data.area[k] / 3.0)
        })
        .collect()
}

/// Patch sums `G_K = Σ_{K' ∈ Δ_K} E_{K'}`.
pub fn patch_sums(data: &MeshData, e: &[Sym2]) -> Vec<Sym2> {
    (0..data.num_triangles())
        .map(|k| data.patch(k).iter().fold(Sym2::ZERO, |s, &j| s.add(&e[j])))
        .collect()
}

/// `G_K` for every element of `u`.
pub fn recovery_matrices(mesh: &Mesh, data: &MeshData, u: &[f64]) -> Vec<Sym2> {
    let grads = data.gradients(mesh, u);
    let pi = recover_from_gradients(mesh, data, &grads);
    patch_sums(data, &element_error_matrices(mesh, data, &grads, &pi))
}

/// `G_K` of one element.
pub fn recovery_matrix(mesh: &Mesh, data: &MeshData, u: &NodalField, pi: &RecoveredGradient, k: usize) -> Result<Sym2> {
    data.check(mesh)?;
    u.check(mesh)?;
    if pi.generation != mesh.generation() || pi.values.len() != mesh.num_vertices() {
        return Err(Error::Stale { field: pi.generation, mesh: mesh.generation() });
    }
    let grads: Vec<[f64; 2]> = data.patch(k).iter().map(|&j| data.gradient(mesh, j, &u.values)).collect();
    let mut s = Sym2::ZERO;
    for (idx, &j) in data.patch(k).iter().enumerate() {
        let t = mesh.triangles()[j];
        let g = grads[idx];
        let mut e = Sym2::ZERO;
        for i in 0..3 {
            let (a, b) = (pi.values[t[i]], pi.values[t[(i + 1) % 3]]);
            e = e.add(&Sym2::outer([g[0] - 0.5 * (a[0] + b[0]), g[1] - 0.5 * (a[1] + b[1])]));
        }
        s = s.add(&e.scale(data.area[j] / 3.0));
    }
    Ok(s)
}

/// `ω_K = (λ1² r1ᵀ G r1 + λ2² r2ᵀ G r2)^{1/2}`.
pub fn omega(frame: &ElementFrame, g: &Sym2) -> f64 {
    let v = frame.lambda1 * frame.lambda1 * g.quad(frame.r1) + frame.lambda2 * frame.lambda2 * g.quad(frame.r2);
    v.max(0.0).sqrt()
}

/// Boundary flux data `g` evaluated at an edge midpoint with its tag.
pub type BoundaryFlux<'a> = &'a dyn Fn(Point, i32) -> f64;

/// Jumps from precomputed elementwise gradients.
pub fn edge_jumps_from_gradients(
    mesh: &Mesh,
    data: &MeshData,
    grads: &[[f64; 2]],
    diffusion: &[f64],
    flux: Option<BoundaryFlux<'_>>,
) -> Vec<f64> {
    let verts = mesh.vertices();
    data.adjacency
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let n = data.edge_normal[i];
            let k = e.tris[0];
            let qk = diffusion[k] * (grads[k][0] * n[0] + grads[k][1] * n[1]);
            if e.tris[1] == NONE {
                let g = flux.map_or(0.0, |f| {
                    let (a, b) = (verts[e.v[0]], verts[e.v[1]]);
                    f([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], e.tag.unwrap_or(0))
                });
                2.0 * (g - qk)
            } else {
                let j = e.tris[1];
                qk - diffusion[j] * (grads[j][0] * n[0] + grads[j][1] * n[1])
            }
        })
        .collect()
}

/// Normal-flux jumps per edge; the normal points out of the edge's first triangle.
pub fn edge_jumps(
    mesh: &Mesh,
    data: &MeshData,
    u: &NodalField,
    diffusion: &[f64],
    flux: Option<BoundaryFlux<'_>>,
) -> Result<Vec<f64>> {
    data.check(mesh)?;
    u.check(mesh)?;
    Ok(edge_jumps_from_gradients(mesh, data, &data.gradients(mesh, &u.values), diffusion, flux))
}

/// `Σ_{e ⊂ ∂K} |e|·jump²` for every element.
pub fn boundary_jump_norms(data: &MeshData, jumps: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; data.num_triangles()];
    for (i, e) in data.adjacency.edges().iter().enumerate() {
        let c = data.edge_length[i] * jumps[i] * jumps[i];
        out[e.tris[0]] += c;
        if e.tris[1] != NONE {
            out[e.tris[1]] += c;
        }
    }
    out
}

/// Serializes fields in the `rdfield 1` format.
pub fn fields_to_string(fields: &[&[f64]]) -> String {
    let nv = fields.first().map_or(0, |f| f.len());
    let mut s = String::with_capacity(24 * nv * fields.len().max(1) + 16);
    let _ = writeln!(s, "rdfield 1\n{} {}", nv, fields.len());
    for i in 0..nv {
        let row: Vec<String> = fields.iter().map(|f| fmt_f64(f[i])).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn write_fields(fields: &[&[f64]], path: &Path) -> Result<()> {
    if fields.iter().any(|f| f.len() != fields[0].len()) {
        return Err(Error::InvalidArgument("fields differ in length".into()));
    }
    std::fs::write(path, fields_to_string(fields))?;
    Ok(())
}

pub fn parse_fields(text: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut tk = Tokens::new(text, path);
    tk.expect_header("rdfield")?;
    let nv: usize = tk.next_parse()?;
    let nc: usize = tk.next_parse()?;
    let mut out = vec![Vec::with_capacity(nv); nc];
    for _ in 0..nv {
        for f in out.iter_mut() {
            f.push(tk.next_parse()?);
        }
    }
    tk.expect_end()?;
    Ok(out)
}

pub fn read_fields(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_fields(&std::fs::read_to_string(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_uniform_mesh, BoundaryEdge, Rect};
    use crate::quadrature::TriangleRule;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(n: usize) -> (Mesh, MeshData) {
        let m = generate_uniform_mesh(n, n, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
        let d = MeshData::new(&m).unwrap();
        (m, d)
    }

    #[test]
    fn operator_basics() {
        let (m, d) = square(5);
        let ops = assemble_operators(&m, &d, &DiffusionCoefficient::Constant(1.0)).unwrap();
        assert_relative_eq!(ops.mass.total(), 1.0, epsilon = 1e-14);
        let ones = vec![1.0; m.num_vertices()];
        assert!(ops.stiffness.mul(&ones).iter().all(|v| v.abs() < 1e-13));
        assert!(ops.mass.is_symmetric(1e-15) && ops.stiffness.is_symmetric(1e-15));
        assert!(ops.stiffness.diagonal().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn two_triangle_stiffness_by_hand() {
        // triangles (0,1,3) and (0,3,2) with vertices 0=(0,0) 1=(1,0) 2=(0,1) 3=(1,1)
        let (m, d) = square(1);
        let ops = assemble_operators(&m, &d, &DiffusionCoefficient::Constant(1.0)).unwrap();
        // each right triangle with legs 1 contributes ½ [[1,-1,0],[-1,2,-1],[0,-1,1]]
        // in the order (acute, right angle, acute)
        let hand = [[1.0, -0.5, -0.5, 0.0], [-0.5, 1.0, 0.0, -0.5], [-0.5, 0.0, 1.0, -0.5], [0.0, -0.5, -0.5, 1.0]];
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(ops.stiffness.get(i, j), hand[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn nonpositive_diffusion_is_rejected() {
        let (m, d) = square(2);
        assert!(matches!(
            assemble_operators(&m, &d, &DiffusionCoefficient::Constant(-1.0)),
            Err(Error::InvalidCoefficient { .. })
        ));
    }

    #[test]
    fn interpolation_examples() {
        let (m, _) = square(1);
        assert!(interpolate_nodal(&m, |_, _| 1.0).unwrap().values.iter().all(|&v| v == 1.0));
        assert_eq!(interpolate_nodal(&m, |x, y| x + y).unwrap().values, vec![0.0, 1.0, 1.0, 2.0]);
        let (m4, _) = square(4);
        let u0 = interpolate_nodal(&m4, |x, y| (-100.0 * (x * x + y * y)).exp()).unwrap();
        assert_eq!(u0.values[0], 1.0);
        assert!(matches!(interpolate_nodal(&m, |x, _| 1.0 / x), Err(Error::Evaluation { vertex: 0, .. })));
    }

    #[test]
    fn transfer_examples() {
        let (m, d) = square(4);
        let f = interpolate_nodal(&m, |x, y| 0.3 - 2.0 * x + 0.7 * y).unwrap();
        let same = transfer_solution(&m, &d.adjacency, &f, &m).unwrap();
        for (a, b) in same.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-15);
        }
        let fine = generate_uniform_mesh(7, 5, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
        let g = transfer_solution(&m, &d.adjacency, &f, &fine).unwrap();
        for (p, v) in fine.vertices().iter().zip(&g.values) {
            assert!((v - (0.3 - 2.0 * p[0] + 0.7 * p[1])).abs() < 1e-13);
        }
        // one triangle refined into four: midpoints get edge averages
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
        let t = vec![[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]];
        let b = [(0, 3), (3, 1), (1, 4), (4, 2), (2, 5), (5, 0)].iter().map(|&(a, b)| BoundaryEdge { a, b, tag: 1 }).collect();
        let refined = Mesh::new(v, t, b).unwrap();
        let coarse = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![
            BoundaryEdge { a: 0, b: 1, tag: 1 },
            BoundaryEdge { a: 1, b: 2, tag: 1 },
            BoundaryEdge { a: 2, b: 0, tag: 1 },
        ])
        .unwrap();
        let cadj = build_adjacency(&coarse).unwrap();
        let vals = [1.0, 5.0, -2.0];
        let out = transfer_fields(&coarse, &cadj, &[&vals], &refined).unwrap().pop().unwrap();
        assert_eq!(&out[..3], &vals);
        assert!((out[3] - 3.0).abs() < 1e-15 && (out[4] - 1.5).abs() < 1e-15 && (out[5] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn transfer_keeps_range() {
        let (m, d) = square(6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<f64> = (0..m.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let other = generate_uniform_mesh(11, 9, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
        let out = transfer_fields(&m, &d.adjacency, &[&f], &other).unwrap().pop().unwrap();
        let (lo, hi) = f.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(out.iter().all(|&v| v >= lo - 1e-15 && v <= hi + 1e-15));
    }

    #[test]
    fn recovery_examples() {
        let (m, d) = square(5);
        let u = interpolate_nodal(&m, |x, y| 2.0 * x - 3.0 * y + 1.0).unwrap();
        let pi = recover_gradient(&m, &d, &u.values);
        for g in &pi.values {
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
        let c = vec![4.0; m.num_vertices()];
        assert!(recover_gradient(&m, &d, &c).values.iter().all(|g| g[0] == 0.0 && g[1] == 0.0));
        assert!(recovery_matrices(&m, &d, &u.values).iter().all(|g| g.trace().abs() < 1e-20));
    }

    #[test]
    fn hat_function_on_symmetric_patch() {
        // square of 4 triangles around the centre vertex
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let t = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
        let b = [(0, 1), (1, 2), (2, 3), (3, 0)].iter().map(|&(a, b)| BoundaryEdge { a, b, tag: 1 }).collect();
        let m = Mesh::new(v, t, b).unwrap();
        let d = MeshData::new(&m).unwrap();
        let pi = recover_gradient(&m, &d, &[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(pi.values[4][0].abs() < 1e-15 && pi.values[4][1].abs() < 1e-15);
    }

    #[test]
    fn recovery_matrix_matches_dense_quadrature() {
        // two-element patch, quadratic nodal data
        let (m, d) = square(1);
        let u = interpolate_nodal(&m, |x, y| x * x + 0.5 * x * y - y * y).unwrap();
        let pi = recover_gradient(&m, &d, &u.values);
        let g = recovery_matrix(&m, &d, &u, &pi, 0).unwrap();
        // oracle: 4^4-fold subdivided degree-5 rule, Π interpolated by the basis
        let rule = TriangleRule::degree5().subdivided(4);
        let mut oracle = Sym2::ZERO;
        for k in 0..2 {
            let t = m.triangles()[k];
            let gu = d.gradient(&m, k, &u.values);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let mut pv = [0.0; 2];
                for i in 0..3 {
                    pv[0] += p[i] * pi.values[t[i]][0];
                    pv[1] += p[i] * pi.values[t[i]][1];
                }
                oracle = oracle.add(&Sym2::outer([gu[0] - pv[0], gu[1] - pv[1]]).scale(w * d.area[k]));
            }
        }
        assert!((g.a - oracle.a).abs() < 1e-13 && (g.b - oracle.b).abs() < 1e-13 && (g.c - oracle.c).abs() < 1e-13);
        assert!(g.trace() > 0.0 && g.det() >= -1e-15);
        let (m2, _) = square(2);
        let other = NodalField::new(&m2, vec![0.0; 9]).unwrap();
        assert!(matches!(recovery_matrix(&m, &d, &other, &pi, 0), Err(Error::Stale { .. })));
    }

    #[test]
    fn recovery_matrices_are_psd() {
        let (m, d) = square(6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u: Vec<f64> = (0..m.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gs = recovery_matrices(&m, &d, &u);
        let uf = NodalField::new(&m, u.clone()).unwrap();
        let pi = recover_gradient(&m, &d, &u);
        for (k, g) in gs.iter().enumerate() {
            assert!(g.a >= 0.0 && g.c >= 0.0 && g.det() >= -1e-12 * g.trace().powi(2));
            let single = recovery_matrix(&m, &d, &uf, &pi, k).unwrap();
            assert!((single.a - g.a).abs() <= 1e-12 * g.trace());
        }
    }

    #[test]
    fn jump_examples() {
        let (m, d) = square(4);
        let a = vec![1.0; m.num_triangles()];
        let u = interpolate_nodal(&m, |x, y| 1.0 + x - 2.0 * y).unwrap();
        let j = edge_jumps(&m, &d, &u, &a, None).unwrap();
        for (e, v) in d.adjacency.edges().iter().zip(&j) {
            if !e.is_boundary() {
                assert!(v.abs() < 1e-12);
            }
        }
        // u = x: on the right boundary ∇u·n = 1, g = 0 ⇒ −2
        let u = interpolate_nodal(&m, |x, _| x).unwrap();
        let j = edge_jumps(&m, &d, &u, &a, None).unwrap();
        for (i, e) in d.adjacency.edges().iter().enumerate() {
            if e.tag == Some(crate::mesh::TAG_RIGHT) {
                assert!((j[i] + 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_element_jump_by_hand() {
        // square(1): triangle 0 = (0,1,3), triangle 1 = (0,3,2); diagonal 0-3
        let (m, d) = square(1);
        let u = NodalField::new(&m, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let a = [2.0, 3.0];
        let j = edge_jumps(&m, &d, &u, &a, None).unwrap();
        let (i, e) = d.adjacency.edges().iter().enumerate().find(|(_, e)| e.v == [0, 3]).unwrap();
        // ∇u = (1, -1) on triangle 0, (0, 0) on triangle 1; n out of triangle 0 is (-1, 1)/√2
        assert_eq!(e.tris, [0, 1]);
        let expected = 2.0 * (-2.0 / 2f64.sqrt());
        assert_relative_eq!(j[i], expected, epsilon = 1e-14);
    }

    #[test]
    fn field_file_round_trip() {
        let a = [0.1, 1.0 / 3.0, -7e-300];
        let b = [1.0, 2.0, 3.0];
        let text = fields_to_string(&[&a, &b]);
        let back = parse_fields(&text, Path::new("mem")).unwrap();
        assert_eq!(back, vec![a.to_vec(), b.to_vec()]);
    }
}
