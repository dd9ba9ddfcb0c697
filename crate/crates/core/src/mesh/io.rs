use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryEdge, Mesh};
use crate::error::{Error, Result};
use crate::textio::{fmt_f64, Tokens};

/// Serializes a mesh in the `rdmesh 1` text format.
pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(48 * (mesh.num_vertices() + mesh.num_triangles()));
    s.push_str("rdmesh 1\n");
    let _ = writeln!(s, "{} {} {}", mesh.num_vertices(), mesh.num_triangles(), mesh.boundary().len());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {}", fmt_f64(p[0]), fmt_f64(p[1]));
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for e in mesh.boundary() {
        let _ = writeln!(s, "{} {} {}", e.a, e.b, e.tag);
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<Mesh> {
    let mut tk = Tokens::new(text, path);
    tk.expect_header("rdmesh")?;
    let nv: usize = tk.next_parse()?;
    let nt: usize = tk.next_parse()?;
    let nb: usize = tk.next_parse()?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push([tk.next_parse()?, tk.next_parse()?]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        triangles.push([tk.next_parse()?, tk.next_parse()?, tk.next_parse()?]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        boundary.push(BoundaryEdge { a: tk.next_parse()?, b: tk.next_parse()?, tag: tk.next_parse()? });
    }
    tk.expect_end()?;
    Mesh::new(vertices, triangles, boundary).map_err(|e| Error::Parse { path: path.to_path_buf(), line: 0, msg: e.to_string() })
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text, path)
}
