use super::{signed_area, Adjacency, Mesh, Point, NONE};
use crate::error::{Error, Result};

/// Containment tolerance on barycentric coordinates.
pub const BARY_TOL: f64 = 1e-12;

/// Relative snap distance for points just outside the domain.
const SNAP_REL: f64 = 1e-10;

/// A located point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub bary: [f64; 3],
}

impl Location {
    /// Barycentric combination of nodal values.
    pub fn eval(&self, mesh: &Mesh, values: &[f64]) -> f64 {
        let t = mesh.triangles()[self.triangle];
        self.bary[0] * values[t[0]] + self.bary[1] * values[t[1]] + self.bary[2] * values[t[2]]
    }
}

fn barycentric(tri: [Point; 3], p: Point) -> [f64; 3] {
    let area = signed_area(tri[0], tri[1], tri[2]);
    let l0 = signed_area(p, tri[1], tri[2]) / area;
    let l1 = signed_area(tri[0], p, tri[2]) / area;
    [l0, l1, 1.0 - l0 - l1]
}

fn closest_on_segment(a: Point, b: Point, p: Point) -> (f64, f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + s * d[0], a[1] + s * d[1]];
    (((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt(), s)
}

/// Finds the triangle containing `p`, walking from `seed` (or triangle 0)
/// and falling back to a full scan.
pub fn locate_point(mesh: &Mesh, adjacency: &Adjacency, p: Point, seed: Option<usize>) -> Result<Location> {
    adjacency.check(mesh)?;
    let nt = mesh.num_triangles();
    if nt == 0 {
        return Err(Error::OutOfDomain(p[0], p[1]));
    }
    let mut k = seed.filter(|&s| s < nt).unwrap_or(0);
    for _ in 0..nt.min(4096) {
        let bary = barycentric(mesh.triangle_points(k), p);
        let (imin, &bmin) = bary
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("three coordinates");
        if bmin >= -BARY_TOL {
            return Ok(Location { triangle: k, bary });
        }
        let next = adjacency.tri_neighbors(k)[imin];
        if next == NONE {
            break;
        }
        k = next;
    }

    // Full scan: best containment first, then distance to the domain.
    let mut best = (f64::NEG_INFINITY, 0usize, [0.0; 3]);
    for k in 0..nt {
        let bary = barycentric(mesh.triangle_points(k), p);
        let m = bary[0].min(bary[1]).min(bary[2]);
        if m > best.0 {
            best = (m, k, bary);
        }
    }
    if best.0 >= -BARY_TOL {
        return Ok(Location { triangle: best.1, bary: best.2 });
    }

    let snap = SNAP_REL * mesh.diameter();
    let mut nearest = (f64::INFINITY, 0usize, [0.0; 3]);
    for k in 0..nt {
        let tri = mesh.triangle_points(k);
        for i in 0..3 {
            let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            let (d, s) = closest_on_segment(a, b, p);
            if d < nearest.0 {
                let mut bary = [0.0; 3];
                bary[(i + 1) % 3] = 1.0 - s;
                bary[(i + 2) % 3] = s;
                nearest = (d, k, bary);
            }
        }
    }
    if nearest.0 <= snap {
        Ok(Location { triangle: nearest.1, bary: nearest.2 })
    } else {
        Err(Error::OutOfDomain(p[0], p[1]))
    }
}
