//! Conformal triangulations: storage, adjacency, point location and the
//! structured generator.

mod generate;
mod io;
mod locate;

use std::sync::atomic::{AtomicU64, Ordering};

pub use generate::{generate_uniform_mesh, Rect, TAG_BOTTOM, TAG_LEFT, TAG_RIGHT, TAG_TOP};
pub use io::{mesh_to_string, parse_mesh, read_mesh, write_mesh};
pub use locate::{locate_point, Location, BARY_TOL};

use crate::error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

/// Marker for "no triangle" in edge and neighbor tables.
pub const NONE: usize = usize::MAX;

static GENERATION: AtomicU64 = AtomicU64::new(1);

/// Returns a generation stamp never handed out before in this process.
pub(crate) fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// A tagged boundary edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: i32,
}

/// Triangle mesh with counterclockwise triangles and tagged boundary edges.
///
/// A mesh is immutable once built; every constructor stamps it with a fresh
/// generation so fields can detect that they belong to another mesh.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    generation: u64,
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

impl Mesh {
    /// Builds a mesh, checking index ranges and triangle orientation.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, boundary: Vec<BoundaryEdge>) -> Result<Self> {
        let nv = vertices.len();
        if let Some((i, p)) = vertices.iter().enumerate().find(|(_, p)| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidArgument(format!("vertex {i} has non-finite coordinates {p:?}")));
        }
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidArgument(format!("triangle {k} references a vertex out of range: {t:?}")));
            }
            let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if !(area > 0.0) {
                return Err(Error::DegenerateElement { index: k, area });
            }
        }
        for e in &boundary {
            if e.a >= nv || e.b >= nv || e.a == e.b {
                return Err(Error::InvalidArgument(format!("boundary edge ({}, {}) is invalid", e.a, e.b)));
            }
        }
        Ok(Self { vertices, triangles, boundary, generation: next_generation() })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|k| self.triangle_area(k)).sum()
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }
}

/// An undirected edge with its one or two incident triangles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    /// Endpoints with `v[0] < v[1]`.
    pub v: [usize; 2],
    /// Incident triangles; `tris[1] == NONE` on the boundary.
    pub tris: [usize; 2],
    /// Boundary tag, if the edge is on the boundary.
    pub tag: Option<i32>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tris[1] == NONE
    }
}

/// Edge table plus triangle and vertex incidences of a [`Mesh`].
#[derive(Clone, Debug)]
pub struct Adjacency {
    generation: u64,
    edges: Vec<Edge>,
    /// `tri_edges[k][i]` is the edge opposite local vertex `i`.
    tri_edges: Vec<[usize; 3]>,
    /// `tri_neighbors[k][i]` is the triangle across the edge opposite vertex `i`.
    tri_neighbors: Vec<[usize; 3]>,
    vertex_tri_offsets: Vec<usize>,
    vertex_tri_list: Vec<usize>,
}

impl Adjacency {
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn tri_edges(&self, k: usize) -> [usize; 3] {
        self.tri_edges[k]
    }

    pub fn tri_neighbors(&self, k: usize) -> [usize; 3] {
        self.tri_neighbors[k]
    }

    /// Triangles incident to vertex `v`, in increasing order.
    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tri_list[self.vertex_tri_offsets[v]..self.vertex_tri_offsets[v + 1]]
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.len() - self.num_boundary_edges()
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.generation != mesh.generation {
            return Err(Error::Stale { field: self.generation, mesh: mesh.generation });
        }
        Ok(())
    }
}

/// Classifies every edge and builds incidence lists.
///
/// Fails on edges shared by more than two triangles, on inconsistently
/// oriented or duplicated triangles, and on edges with a single incident
/// triangle that are not tagged as boundary (hanging vertices).
pub fn build_adjacency(mesh: &Mesh) -> Result<Adjacency> {
    let nt = mesh.num_triangles();
    let nv = mesh.num_vertices();

    // (min, max, triangle, local index of the opposite vertex, forward?)
    let mut half: Vec<(usize, usize, usize, usize, bool)> = Vec::with_capacity(3 * nt);
    for (k, t) in mesh.triangles.iter().enumerate() {
        for i in 0..3 {
            let a = t[(i + 1) % 3];
            let b = t[(i + 2) % 3];
            half.push((a.min(b), a.max(b), k, i, a < b));
        }
    }
    half.sort_unstable_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)));

    let mut tags = std::collections::HashMap::with_capacity(mesh.boundary.len());
    for e in &mesh.boundary {
        if tags.insert((e.a.min(e.b), e.a.max(e.b)), e.tag).is_some() {
            return Err(Error::Topology(e.a, e.b, "boundary edge listed twice".into()));
        }
    }

    let mut edges = Vec::with_capacity(half.len() / 2 + mesh.boundary.len());
    let mut tri_edges = vec![[NONE; 3]; nt];
    let mut tri_neighbors = vec![[NONE; 3]; nt];
    let mut i = 0;
    while i < half.len() {
        let mut j = i + 1;
        while j < half.len() && half[j].0 == half[i].0 && half[j].1 == half[i].1 {
            j += 1;
        }
        let (a, b) = (half[i].0, half[i].1);
        let id = edges.len();
        match j - i {
            1 => {
                let tag = tags.remove(&(a, b)).ok_or_else(|| {
                    Error::Topology(a, b, "edge has one incident triangle but is not a tagged boundary edge".into())
                })?;
                let (_, _, k, l, _) = half[i];
                tri_edges[k][l] = id;
                edges.push(Edge { v: [a, b], tris: [k, NONE], tag: Some(tag) });
            }
            2 => {
                let (h0, h1) = (half[i], half[i + 1]);
                if h0.4 == h1.4 {
                    return Err(Error::Topology(a, b, "edge is traversed twice in the same direction".into()));
                }
                if tags.contains_key(&(a, b)) {
                    return Err(Error::Topology(a, b, "tagged boundary edge is shared by two triangles".into()));
                }
                tri_edges[h0.2][h0.3] = id;
                tri_edges[h1.2][h1.3] = id;
                tri_neighbors[h0.2][h0.3] = h1.2;
                tri_neighbors[h1.2][h1.3] = h0.2;
                edges.push(Edge { v: [a, b], tris: [h0.2, h1.2], tag: None });
            }
            n => return Err(Error::Topology(a, b, format!("edge shared by {n} triangles"))),
        }
        i = j;
    }
    if let Some((&(a, b), _)) = tags.iter().min() {
        return Err(Error::Topology(a, b, "tagged boundary edge is not an edge of any triangle".into()));
    }

    let mut counts = vec![0usize; nv + 1];
    for t in &mesh.triangles {
        for &v in t {
            counts[v + 1] += 1;
        }
    }
    for v in 0..nv {
        counts[v + 1] += counts[v];
    }
    let mut fill = counts.clone();
    let mut list = vec![0; counts[nv]];
    for (k, t) in mesh.triangles.iter().enumerate() {
        for &v in t {
            list[fill[v]] = k;
            fill[v] += 1;
        }
    }

    Ok(Adjacency {
        generation: mesh.generation,
        edges,
        tri_edges,
        tri_neighbors,
        vertex_tri_offsets: counts,
        vertex_tri_list: list,
    })
}

/// Triangles sharing at least one vertex with `k` (sorted, includes `k`).
pub fn vertex_patch(mesh: &Mesh, adjacency: &Adjacency, k: usize) -> Vec<usize> {
    let mut patch: Vec<usize> = mesh.triangles[k]
        .iter()
        .flat_map(|&v| adjacency.vertex_triangles(v).iter().copied())
        .collect();
    patch.sort_unstable();
    patch.dedup();
    patch
}
