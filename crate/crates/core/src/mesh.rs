//! Triangle meshes, edge topology and element quality.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{self, dist, midpoint, signed_area, Point, PolygonDomain};

pub mod io;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonConforming(usize, usize),
    #[error("triangle {0} is degenerate or clockwise (signed area {1:e})")]
    DegenerateElement(usize, f64),
    #[error("triangle {tri} references vertex {vertex} out of range")]
    VertexOutOfRange { tri: usize, vertex: usize },
    #[error("per-vertex or per-triangle array has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("boundary edge ({0}, {1}) does not lie on the domain boundary")]
    StrayBoundaryEdge(usize, usize),
    #[error("domain corner {0} is not a mesh vertex")]
    MissingCorner(usize),
    #[error("domain boundary is not covered: edge length sum {got} vs perimeter {expected}")]
    BoundaryNotCovered { got: f64, expected: f64 },
}

/// Where a vertex sits relative to the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryFlag {
    Interior,
    /// On the relative interior of a domain segment.
    Segment(usize),
    /// A domain corner.
    Corner(usize),
}

impl BoundaryFlag {
    pub fn is_boundary(self) -> bool {
        !matches!(self, BoundaryFlag::Interior)
    }

    /// Integer marker used by the `.node` format: 0 interior, `s + 1` for
    /// segment `s`, `-(c + 1)` for corner `c`.
    pub fn marker(self) -> i64 {
        match self {
            BoundaryFlag::Interior => 0,
            BoundaryFlag::Segment(s) => s as i64 + 1,
            BoundaryFlag::Corner(c) => -(c as i64) - 1,
        }
    }

    pub fn from_marker(m: i64) -> Self {
        match m {
            0 => BoundaryFlag::Interior,
            m if m > 0 => BoundaryFlag::Segment((m - 1) as usize),
            m => BoundaryFlag::Corner((-m - 1) as usize),
        }
    }
}

/// A conforming triangulation.
///
/// Local edge `i` of a triangle is the edge opposite its local vertex `i`.
/// `refinement_edge[t]` names the edge newest-vertex bisection splits next,
/// so the vertex opposite it is the triangle's newest vertex.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryFlag>,
    pub refinement_edge: Vec<u8>,
    pub domain: Option<Arc<PolygonDomain>>,
}

impl Mesh {
    /// Assemble a mesh, checking index ranges, array lengths and that every
    /// triangle is counter-clockwise with positive area.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryFlag>,
        refinement_edge: Vec<u8>,
        domain: Option<Arc<PolygonDomain>>,
    ) -> Result<Self, MeshError> {
        if boundary.len() != vertices.len() {
            return Err(MeshError::LengthMismatch {
                got: boundary.len(),
                expected: vertices.len(),
            });
        }
        if refinement_edge.len() != triangles.len() {
            return Err(MeshError::LengthMismatch {
                got: refinement_edge.len(),
                expected: triangles.len(),
            });
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::VertexOutOfRange { tri: t, vertex: v });
                }
            }
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(a > 0.0) {
                return Err(MeshError::DegenerateElement(t, a));
            }
        }
        Ok(Self {
            vertices,
            triangles,
            boundary,
            refinement_edge,
            domain,
        })
    }

    /// Like [`Mesh::new`], seeding every refinement edge with the longest edge.
    pub fn with_longest_edges(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryFlag>,
        domain: Option<Arc<PolygonDomain>>,
    ) -> Result<Self, MeshError> {
        let refinement_edge = triangles
            .iter()
            .map(|t| longest_edge(t.map(|v| vertices[v])))
            .collect();
        Self::new(vertices, triangles, boundary, refinement_edge, domain)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    pub fn points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    #[inline]
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Diameter of triangle `t` (its longest edge).
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.points(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    /// Constant gradients of the three barycentric basis functions on `t`.
    pub fn basis_gradients(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.points(t);
        let twice = 2.0 * signed_area(a, b, c);
        [
            [(b[1] - c[1]) / twice, (c[0] - b[0]) / twice],
            [(c[1] - a[1]) / twice, (a[0] - c[0]) / twice],
            [(a[1] - b[1]) / twice, (b[0] - a[0]) / twice],
        ]
    }

    /// Triangles incident to each vertex, in ascending triangle order.
    pub fn vertex_patches(&self) -> Vec<Vec<usize>> {
        let mut patches = vec![Vec::new(); self.num_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                patches[v].push(t);
            }
        }
        patches
    }

    pub fn corners(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_vertices()).filter(|&v| matches!(self.boundary[v], BoundaryFlag::Corner(_)))
    }

    /// Domain segment carrying the boundary edge `(a, b)`, resolved from the
    /// endpoint flags.
    pub fn boundary_segment_of_edge(&self, a: usize, b: usize) -> Option<usize> {
        let domain = self.domain.as_deref()?;
        match (self.boundary[a], self.boundary[b]) {
            (BoundaryFlag::Segment(s), _) | (_, BoundaryFlag::Segment(s)) => Some(s),
            (BoundaryFlag::Corner(c1), BoundaryFlag::Corner(c2)) => {
                domain.segment_between_corners(c1, c2)
            }
            _ => None,
        }
    }

    /// Full invariant check: conformity, and when a domain is attached, that the
    /// boundary edges exactly cover the domain boundary.
    pub fn validate(&self) -> Result<EdgeTable, MeshError> {
        let edges = build_edge_table(self)?;
        if let Some(domain) = self.domain.as_deref() {
            let tol = 1e-9 * domain.diameter();
            for (c, &p) in domain.corners().iter().enumerate() {
                let found = self
                    .vertices
                    .iter()
                    .zip(&self.boundary)
                    .any(|(&v, &f)| f == BoundaryFlag::Corner(c) && dist(v, p) <= tol);
                if !found {
                    return Err(MeshError::MissingCorner(c));
                }
            }
            let mut length = 0.0;
            for e in edges.edges.iter().filter(|e| e.is_boundary()) {
                let [a, b] = e.vertices;
                let s = self
                    .boundary_segment_of_edge(a, b)
                    .ok_or(MeshError::StrayBoundaryEdge(a, b))?;
                let seg = domain.segments()[s];
                for v in [a, b] {
                    if geometry::segment_distance(self.vertices[v], seg.start, seg.end).0 > tol {
                        return Err(MeshError::StrayBoundaryEdge(a, b));
                    }
                }
                length += e.length;
            }
            let perimeter = domain.perimeter();
            if (length - perimeter).abs() > 1e-9 * perimeter {
                return Err(MeshError::BoundaryNotCovered {
                    got: length,
                    expected: perimeter,
                });
            }
        }
        Ok(edges)
    }
}

/// Local index of the longest edge; ties go to the lowest local index.
pub fn longest_edge(p: [Point; 3]) -> u8 {
    let len = |i: usize| geometry::dist2(p[(i + 1) % 3], p[(i + 2) % 3]);
    let mut best = 0;
    for i in 1..3 {
        if len(i) > len(best) {
            best = i;
        }
    }
    best as u8
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints, lower index first.
    pub vertices: [usize; 2],
    /// First incident triangle and, for interior edges, the second.
    pub triangles: [usize; 2],
    pub interior: bool,
    /// Unit normal: the direction from the lower to the higher endpoint,
    /// rotated by +90°.
    pub normal: Point,
    pub length: f64,
    pub midpoint: Point,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        !self.interior
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTable {
    pub edges: Vec<Edge>,
    /// Global edge index of each triangle's local edges.
    pub triangle_edges: Vec<[usize; 3]>,
}

impl EdgeTable {
    pub fn num_interior(&self) -> usize {
        self.edges.iter().filter(|e| e.interior).count()
    }

    pub fn num_boundary(&self) -> usize {
        self.edges.len() - self.num_interior()
    }

    /// Neighbor of `t` across its local edge `i`.
    pub fn neighbor(&self, t: usize, i: usize) -> Option<usize> {
        let e = &self.edges[self.triangle_edges[t][i]];
        if !e.interior {
            None
        } else if e.triangles[0] == t {
            Some(e.triangles[1])
        } else {
            Some(e.triangles[0])
        }
    }
}

/// Enumerate edges in order of first appearance (triangle order, then local
/// edge order), so the table is a pure function of the mesh.
pub fn build_edge_table(mesh: &Mesh) -> Result<EdgeTable, MeshError> {
    let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * mesh.num_triangles());
    let mut edges: Vec<Edge> = Vec::with_capacity(3 * mesh.num_triangles() / 2 + 8);
    let mut triangle_edges = Vec::with_capacity(mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let mut local = [0usize; 3];
        for (i, slot) in local.iter_mut().enumerate() {
            let a = tri[(i + 1) % 3];
            let b = tri[(i + 2) % 3];
            let key = (a.min(b), a.max(b));
            match index.get(&key) {
                Some(&e) => {
                    let edge = &mut edges[e];
                    if edge.interior {
                        return Err(MeshError::NonConforming(key.0, key.1));
                    }
                    edge.triangles[1] = t;
                    edge.interior = true;
                    *slot = e;
                }
                None => {
                    let (p, q) = (mesh.vertices[key.0], mesh.vertices[key.1]);
                    let length = dist(p, q);
                    let normal = [-(q[1] - p[1]) / length, (q[0] - p[0]) / length];
                    index.insert(key, edges.len());
                    *slot = edges.len();
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        triangles: [t, t],
                        interior: false,
                        normal,
                        length,
                        midpoint: midpoint(p, q),
                    });
                }
            }
        }
        triangle_edges.push(local);
    }
    Ok(EdgeTable {
        edges,
        triangle_edges,
    })
}

/// `4√3·area / (|e₁|² + |e₂|² + |e₃|²)`; one exactly for equilateral triangles.
pub fn triangle_quality(mesh: &Mesh) -> Result<Vec<f64>, MeshError> {
    (0..mesh.num_triangles())
        .map(|t| {
            let [a, b, c] = mesh.points(t);
            let area = signed_area(a, b, c);
            if !(area > 0.0) {
                return Err(MeshError::DegenerateElement(t, area));
            }
            let s = geometry::dist2(a, b) + geometry::dist2(b, c) + geometry::dist2(c, a);
            Ok(4.0 * 3f64.sqrt() * area / s)
        })
        .collect()
}

pub fn mean_quality(mesh: &Mesh) -> Result<f64, MeshError> {
    let q = triangle_quality(mesh)?;
    Ok(q.iter().sum::<f64>() / q.len() as f64)
}

/// Interior angles of a triangle, at its vertices in order.
pub fn angles(p: [Point; 3]) -> [f64; 3] {
    let angle_at = |i: usize| {
        let u = geometry::sub(p[(i + 1) % 3], p[i]);
        let v = geometry::sub(p[(i + 2) % 3], p[i]);
        let cross = u[0] * v[1] - u[1] * v[0];
        cross.abs().atan2(geometry::dot(u, v))
    };
    [angle_at(0), angle_at(1), angle_at(2)]
}

/// Smallest interior angle over the mesh, in radians.
pub fn min_angle(mesh: &Mesh) -> Result<f64, MeshError> {
    let mut m = f64::INFINITY;
    for t in 0..mesh.num_triangles() {
        let area = mesh.area(t);
        if !(area > 0.0) {
            return Err(MeshError::DegenerateElement(t, area));
        }
        for a in angles(mesh.points(t)) {
            m = m.min(a);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn raw(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Mesh {
        let n = vertices.len();
        Mesh::with_longest_edges(vertices, triangles, vec![BoundaryFlag::Interior; n], None).unwrap()
    }

    fn equilateral() -> Mesh {
        raw(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]], vec![[0, 1, 2]])
    }

    #[test]
    fn single_triangle_has_three_boundary_edges() {
        let t = build_edge_table(&equilateral()).unwrap();
        assert_eq!(t.edges.len(), 3);
        assert_eq!(t.num_boundary(), 3);
    }

    #[test]
    fn two_triangles_share_one_edge() {
        let m = raw(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        );
        let t = build_edge_table(&m).unwrap();
        assert_eq!(t.edges.len(), 5);
        assert_eq!(t.num_interior(), 1);
        assert_eq!(t.num_boundary(), 4);
        let diag = t.edges.iter().find(|e| e.interior).unwrap();
        assert_eq!(diag.vertices, [0, 2]);
        let s = 0.5f64.sqrt();
        assert!((diag.normal[0] + s).abs() < 1e-15 && (diag.normal[1] - s).abs() < 1e-15);
        assert_eq!(t.neighbor(0, 1), Some(1));
    }

    #[test]
    fn three_triangles_on_one_edge_is_rejected() {
        let m = raw(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, 2.0], [0.5, -1.0]],
            vec![[0, 1, 2], [0, 1, 3], [1, 0, 4]],
        );
        assert_eq!(build_edge_table(&m), Err(MeshError::NonConforming(0, 1)));
    }

    #[test]
    fn quality_values() {
        let q = triangle_quality(&equilateral()).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-15);
        let right = raw(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]);
        let q = triangle_quality(&right).unwrap();
        assert!((q[0] - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((min_angle(&right).unwrap() - PI / 4.0).abs() < 1e-15);
        assert!((min_angle(&equilateral()).unwrap() - PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn collapsed_triangle_is_an_error() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]],
            vec![[0, 1, 2]],
            vec![BoundaryFlag::Interior; 3],
            vec![0],
            None,
        );
        assert!(matches!(m, Err(MeshError::DegenerateElement(0, _))));
        let mut ok = equilateral();
        ok.vertices[2] = [2.0, 0.0];
        assert!(triangle_quality(&ok).is_err());
        assert!(min_angle(&ok).is_err());
    }

    #[test]
    fn basis_gradients_sum_to_zero() {
        let m = raw(vec![[0.0, 0.0], [2.0, 0.1], [0.3, 1.0]], vec![[0, 1, 2]]);
        let g = m.basis_gradients(0);
        for k in 0..2 {
            assert!((g[0][k] + g[1][k] + g[2][k]).abs() < 1e-15);
        }
    }

    #[test]
    fn marker_round_trip() {
        for f in [BoundaryFlag::Interior, BoundaryFlag::Segment(3), BoundaryFlag::Corner(0)] {
            assert_eq!(BoundaryFlag::from_marker(f.marker()), f);
        }
    }
}
