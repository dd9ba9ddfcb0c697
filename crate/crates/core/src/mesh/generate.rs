use super::{BoundaryEdge, Mesh};
use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Boundary tags used by the structured generator.
pub const TAG_BOTTOM: i32 = 1;
pub const TAG_RIGHT: i32 = 2;
pub const TAG_TOP: i32 = 3;
pub const TAG_LEFT: i32 = 4;

/// Structured `nx × ny` grid; every cell is cut along its lower-left to
/// upper-right diagonal. Cell `(i, j)` owns triangles `2c` and `2c + 1` with
/// `c = j·nx + i`.
pub fn generate_uniform_mesh(nx: usize, ny: usize, bounds: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!("grid size must be positive, got {nx}x{ny}")));
    }
    let ok = [bounds.x0, bounds.x1, bounds.y0, bounds.y1].iter().all(|v| v.is_finite());
    if !ok || !(bounds.x1 > bounds.x0) || !(bounds.y1 > bounds.y0) {
        return Err(Error::InvalidArgument(format!("degenerate rectangle {bounds:?}")));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // pin the last row/column to the exact bound
        let y = if j == ny { bounds.y1 } else { bounds.y0 + (bounds.y1 - bounds.y0) * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { bounds.x1 } else { bounds.x0 + (bounds.x1 - bounds.x0) * i as f64 / nx as f64 };
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary.push(BoundaryEdge { a: id(i, 0), b: id(i + 1, 0), tag: TAG_BOTTOM });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge { a: id(nx, j), b: id(nx, j + 1), tag: TAG_RIGHT });
    }
    for i in (0..nx).rev() {
        boundary.push(BoundaryEdge { a: id(i + 1, ny), b: id(i, ny), tag: TAG_TOP });
    }
    for j in (0..ny).rev() {
        boundary.push(BoundaryEdge { a: id(0, j + 1), b: id(0, j), tag: TAG_LEFT });
    }
    Mesh::new(vertices, triangles, boundary)
}
