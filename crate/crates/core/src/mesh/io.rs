//! Mesh files: Triangle-style `.node`/`.ele` pairs and legacy VTK.
//!
//! `.node`: header `<#vertices> 2 0 1`, then `index x y marker` with markers
//! from [`BoundaryFlag::marker`]. `.ele`: header `<#triangles> 3 1`, then
//! `index a b c refinement_edge`. Indices are zero-based.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use super::{BoundaryFlag, Mesh, MeshError};
use crate::geometry::PolygonDomain;

#[derive(Debug, Error)]
pub enum MeshIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("field `{name}` has {got} values, expected {expected}")]
    FieldLength {
        name: String,
        got: usize,
        expected: usize,
    },
}

pub fn node_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    writeln!(s, "{} 2 0 1", mesh.num_vertices()).unwrap();
    for (i, (p, f)) in mesh.vertices.iter().zip(&mesh.boundary).enumerate() {
        writeln!(s, "{} {:.17e} {:.17e} {}", i, p[0], p[1], f.marker()).unwrap();
    }
    s
}

pub fn ele_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    writeln!(s, "{} 3 1", mesh.num_triangles()).unwrap();
    for (i, (t, r)) in mesh.triangles.iter().zip(&mesh.refinement_edge).enumerate() {
        writeln!(s, "{} {} {} {} {}", i, t[0], t[1], t[2], r).unwrap();
    }
    s
}

/// Write `<stem>.node` and `<stem>.ele`.
pub fn write_triangle(mesh: &Mesh, stem: &Path) -> Result<(), MeshIoError> {
    fs::write(stem.with_extension("node"), node_string(mesh))?;
    fs::write(stem.with_extension("ele"), ele_string(mesh))?;
    Ok(())
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> + '_ {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("")))
        .map(|(i, l)| (i, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, f)| !f.is_empty())
}

fn parse<T: std::str::FromStr>(tok: &str, file: &str, line: usize) -> Result<T, MeshIoError> {
    tok.parse().map_err(|_| MeshIoError::Parse {
        file: file.to_string(),
        line,
        msg: format!("cannot parse `{tok}`"),
    })
}

/// Parse a `.node`/`.ele` pair. Triangles without a refinement-edge attribute
/// get their longest edge.
pub fn parse_triangle(
    node: &str,
    ele: &str,
    domain: Option<Arc<PolygonDomain>>,
) -> Result<Mesh, MeshIoError> {
    let bad = |file: &str, line: usize, msg: &str| MeshIoError::Parse {
        file: file.to_string(),
        line,
        msg: msg.to_string(),
    };

    let mut it = records(node);
    let (l, head) = it.next().ok_or_else(|| bad("node", 0, "empty file"))?;
    let n: usize = parse(head[0], "node", l)?;
    if head.len() < 2 || head[1] != "2" {
        return Err(bad("node", l, "only 2D meshes are supported"));
    }
    let mut vertices = Vec::with_capacity(n);
    let mut boundary = Vec::with_capacity(n);
    for (l, f) in it.take(n) {
        if f.len() < 3 {
            return Err(bad("node", l, "expected `index x y [marker]`"));
        }
        vertices.push([parse(f[1], "node", l)?, parse(f[2], "node", l)?]);
        let marker: i64 = match f.get(3) {
            Some(m) => parse(m, "node", l)?,
            None => 0,
        };
        boundary.push(BoundaryFlag::from_marker(marker));
    }
    if vertices.len() != n {
        return Err(bad("node", 0, "fewer vertices than announced"));
    }

    let mut it = records(ele);
    let (l, head) = it.next().ok_or_else(|| bad("ele", 0, "empty file"))?;
    let m: usize = parse(head[0], "ele", l)?;
    let mut triangles = Vec::with_capacity(m);
    let mut refinement = Vec::with_capacity(m);
    let mut all_have_attr = true;
    for (l, f) in it.take(m) {
        if f.len() < 4 {
            return Err(bad("ele", l, "expected `index a b c [attr]`"));
        }
        triangles.push([
            parse(f[1], "ele", l)?,
            parse(f[2], "ele", l)?,
            parse(f[3], "ele", l)?,
        ]);
        match f.get(4) {
            Some(r) => {
                let r: u8 = parse(r, "ele", l)?;
                if r > 2 {
                    return Err(bad("ele", l, "refinement edge must be 0, 1 or 2"));
                }
                refinement.push(r)
            }
            None => all_have_attr = false,
        }
    }
    if triangles.len() != m {
        return Err(bad("ele", 0, "fewer triangles than announced"));
    }
    let mesh = if all_have_attr {
        Mesh::new(vertices, triangles, boundary, refinement, domain)?
    } else {
        Mesh::with_longest_edges(vertices, triangles, boundary, domain)?
    };
    Ok(mesh)
}

pub fn read_triangle(stem: &Path, domain: Option<Arc<PolygonDomain>>) -> Result<Mesh, MeshIoError> {
    let node = fs::read_to_string(stem.with_extension("node"))?;
    let ele = fs::read_to_string(stem.with_extension("ele"))?;
    parse_triangle(&node, &ele, domain)
}

/// A named scalar field for VTK output.
#[derive(Debug, Clone, Copy)]
pub struct Field<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

/// Legacy ASCII VTK `UNSTRUCTURED_GRID` with triangle cells (type 5).
pub fn vtk_string(
    mesh: &Mesh,
    point_data: &[Field<'_>],
    cell_data: &[Field<'_>],
) -> Result<String, MeshIoError> {
    for (fields, expected) in [(point_data, mesh.num_vertices()), (cell_data, mesh.num_triangles())] {
        for f in fields {
            if f.values.len() != expected {
                return Err(MeshIoError::FieldLength {
                    name: f.name.to_string(),
                    got: f.values.len(),
                    expected,
                });
            }
        }
    }

    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("hat-afem mesh\n");
    s.push_str("ASCII\n");
    s.push_str("DATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {} double", mesh.num_vertices()).unwrap();
    for p in &mesh.vertices {
        writeln!(s, "{:.17e} {:.17e} 0", p[0], p[1]).unwrap();
    }
    let nt = mesh.num_triangles();
    writeln!(s, "CELLS {} {}", nt, 4 * nt).unwrap();
    for t in &mesh.triangles {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {}", nt).unwrap();
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let section = |s: &mut String, kind: &str, n: usize, fields: &[Field<'_>]| {
        if fields.is_empty() {
            return;
        }
        writeln!(s, "{} {}", kind, n).unwrap();
        for f in fields {
            writeln!(s, "SCALARS {} double 1", f.name).unwrap();
            s.push_str("LOOKUP_TABLE default\n");
            for v in f.values {
                writeln!(s, "{:.17e}", v).unwrap();
            }
        }
    };
    section(&mut s, "POINT_DATA", mesh.num_vertices(), point_data);
    section(&mut s, "CELL_DATA", nt, cell_data);
    Ok(s)
}

pub fn write_vtk(
    mesh: &Mesh,
    path: &Path,
    point_data: &[Field<'_>],
    cell_data: &[Field<'_>],
) -> Result<(), MeshIoError> {
    fs::write(path, vtk_string(mesh, point_data, cell_data)?)?;
    Ok(())
}
