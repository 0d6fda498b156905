//! Delaunay and boundary-conforming Delaunay triangulation.
//!
//! Points are inserted with Bowyer–Watson into a large enclosing triangle,
//! in Hilbert-curve order so that each point location walk stays short.
//! Domain boundary pieces are then recovered by edge flips, the remaining
//! edges are made locally Delaunay, and triangles whose centroid falls
//! outside the domain are discarded.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{self, dist, incircle, orient, Point, PolygonDomain};
use crate::mesh::{BoundaryFlag, Mesh, MeshError};

const NONE: usize = usize::MAX;

/// Points closer than this are duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;
/// Allowed distance of a boundary sample from its segment, relative to the domain diameter.
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TriangulationError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    Collinear,
    #[error("points {0} and {1} coincide")]
    DuplicatePoint(usize, usize),
    #[error("cannot recover boundary segment {segment}: {reason}")]
    BoundaryRecovery { segment: usize, reason: String },
    #[error("interior point {index} at ({x}, {y}) is not strictly inside the domain")]
    Containment { index: usize, x: f64, y: f64 },
    #[error("boundary point {index} at ({x}, {y}) is not on the domain boundary")]
    OffBoundary { index: usize, x: f64, y: f64 },
    #[error("triangulation failed: {0}")]
    Internal(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Working triangulation with neighbor links. Neighbor `i` of a triangle is
/// across the edge opposite its vertex `i`.
struct Triangulation {
    pts: Vec<Point>,
    tris: Vec<[usize; 3]>,
    nbr: Vec<[usize; 3]>,
    alive: Vec<bool>,
    free: Vec<usize>,
    vtri: Vec<usize>,
}

impl Triangulation {
    /// Enclose `points` in a triangle far outside their bounding box. The
    /// three auxiliary vertices are appended after the input points.
    fn with_super_triangle(points: &[Point]) -> Self {
        let (lo, hi) = geometry::bounding_box(points);
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let s = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE) * 1e4;
        let mut pts = points.to_vec();
        let n = pts.len();
        pts.push([c[0] - 2.0 * s, c[1] - s]);
        pts.push([c[0] + 2.0 * s, c[1] - s]);
        pts.push([c[0], c[1] + 2.0 * s]);
        let mut vtri = vec![NONE; n + 3];
        vtri[n] = 0;
        vtri[n + 1] = 0;
        vtri[n + 2] = 0;
        Self {
            pts,
            tris: vec![[n, n + 1, n + 2]],
            nbr: vec![[NONE; 3]],
            alive: vec![true],
            free: Vec::new(),
            vtri,
        }
    }

    fn n_input(&self) -> usize {
        self.pts.len() - 3
    }

    fn alloc(&mut self, tri: [usize; 3], nbr: [usize; 3]) -> usize {
        let t = if let Some(t) = self.free.pop() {
            self.tris[t] = tri;
            self.nbr[t] = nbr;
            self.alive[t] = true;
            t
        } else {
            self.tris.push(tri);
            self.nbr.push(nbr);
            self.alive.push(true);
            self.tris.len() - 1
        };
        for v in tri {
            self.vtri[v] = t;
        }
        t
    }

    fn kill(&mut self, t: usize) {
        self.alive[t] = false;
        self.free.push(t);
    }

    fn replace_nbr(&mut self, t: usize, old: usize, new: usize) {
        if t == NONE {
            return;
        }
        for k in 0..3 {
            if self.nbr[t][k] == old {
                self.nbr[t][k] = new;
                return;
            }
        }
    }

    fn local_index(&self, t: usize, v: usize) -> usize {
        self.tris[t].iter().position(|&x| x == v).expect("vertex in triangle")
    }

    /// Visibility walk from `start` to a triangle containing `p` (possibly on its boundary).
    fn locate(&self, p: Point, start: usize) -> usize {
        let mut t = start;
        let mut steps = 0usize;
        let limit = 4 * self.tris.len() + 64;
        'walk: while steps < limit {
            let tri = self.tris[t];
            for j in 0..3 {
                let k = (j + steps) % 3;
                let a = self.pts[tri[(k + 1) % 3]];
                let b = self.pts[tri[(k + 2) % 3]];
                if orient(a, b, p) < 0.0 {
                    let n = self.nbr[t][k];
                    if n == NONE {
                        break;
                    }
                    t = n;
                    steps += 1;
                    continue 'walk;
                }
            }
            return t;
        }
        (0..self.tris.len())
            .filter(|&t| self.alive[t])
            .find(|&t| {
                let tri = self.tris[t];
                (0..3).all(|k| orient(self.pts[tri[(k + 1) % 3]], self.pts[tri[(k + 2) % 3]], p) >= 0.0)
            })
            .expect("point inside the enclosing triangle")
    }

    /// Bowyer–Watson insertion of vertex `v`; returns one of the new triangles.
    fn insert(&mut self, v: usize, start: usize) -> usize {
        let p = self.pts[v];
        let t0 = self.locate(p, start);
        let mut cavity = vec![t0];
        let mut in_cavity: HashSet<usize> = HashSet::from([t0]);
        let mut i = 0;
        while i < cavity.len() {
            let c = cavity[i];
            i += 1;
            for k in 0..3 {
                let n = self.nbr[c][k];
                if n == NONE || in_cavity.contains(&n) {
                    continue;
                }
                let [a, b, d] = self.tris[n].map(|x| self.pts[x]);
                if incircle(a, b, d, p) > 0.0 {
                    in_cavity.insert(n);
                    cavity.push(n);
                }
            }
        }

        // Boundary edges (u, w) seen from inside, with the triangle beyond.
        let boundary = loop {
            let mut boundary = Vec::new();
            let mut grow = None;
            for &c in &cavity {
                for k in 0..3 {
                    let n = self.nbr[c][k];
                    if n != NONE && in_cavity.contains(&n) {
                        continue;
                    }
                    let u = self.tris[c][(k + 1) % 3];
                    let w = self.tris[c][(k + 2) % 3];
                    if orient(self.pts[u], self.pts[w], p) <= 0.0 && n != NONE {
                        grow = Some(n);
                    }
                    boundary.push((u, w, n, c));
                }
            }
            match grow {
                Some(n) => {
                    in_cavity.insert(n);
                    cavity.push(n);
                }
                None => break boundary,
            }
        };

        // allocate before freeing the cavity so new indices never alias old ones
        let mut created = Vec::with_capacity(boundary.len());
        for &(u, w, n, c) in &boundary {
            let t = self.alloc([u, w, v], [NONE, NONE, n]);
            self.replace_nbr(n, c, t);
            created.push((u, w, t));
        }
        for &c in &cavity {
            self.kill(c);
        }
        for &(u, w, t) in &created {
            // Edge opposite u is (w, v): shared with the triangle starting at w.
            let next = created.iter().find(|x| x.0 == w).map(|x| x.2).unwrap_or(NONE);
            let prev = created.iter().find(|x| x.1 == u).map(|x| x.2).unwrap_or(NONE);
            self.nbr[t][0] = next;
            self.nbr[t][1] = prev;
        }
        created[0].2
    }

    /// Flip the edge opposite local vertex `i` of `t`. With `t = (a, b, c)` and
    /// neighbor `(d, c, b)` the result is `t = (a, b, d)`, `u = (a, d, c)`.
    fn flip(&mut self, t: usize, i: usize) -> usize {
        let u = self.nbr[t][i];
        let a = self.tris[t][i];
        let b = self.tris[t][(i + 1) % 3];
        let c = self.tris[t][(i + 2) % 3];
        let j = (0..3).find(|&k| self.nbr[u][k] == t).expect("mutual neighbors");
        let d = self.tris[u][j];
        let n_ab = self.nbr[t][(i + 2) % 3];
        let n_ca = self.nbr[t][(i + 1) % 3];
        let n_dc = self.nbr[u][(j + 2) % 3];
        let n_bd = self.nbr[u][(j + 1) % 3];
        self.tris[t] = [a, b, d];
        self.nbr[t] = [n_bd, u, n_ab];
        self.tris[u] = [a, d, c];
        self.nbr[u] = [n_dc, n_ca, t];
        self.replace_nbr(n_bd, u, t);
        self.replace_nbr(n_ca, t, u);
        self.vtri[a] = t;
        self.vtri[b] = t;
        self.vtri[d] = t;
        self.vtri[c] = u;
        u
    }

    /// Whether the edge opposite `i` in `t` should be flipped to the other diagonal.
    /// Cocircular quadruples keep the diagonal with the smaller lower endpoint index.
    fn wants_flip(&self, t: usize, i: usize) -> bool {
        let u = self.nbr[t][i];
        if u == NONE {
            return false;
        }
        let a = self.tris[t][i];
        let b = self.tris[t][(i + 1) % 3];
        let c = self.tris[t][(i + 2) % 3];
        let j = (0..3).find(|&k| self.nbr[u][k] == t).expect("mutual neighbors");
        let d = self.tris[u][j];
        let [pa, pb, pc, pd] = [a, b, c, d].map(|x| self.pts[x]);
        let s = incircle(pa, pb, pc, pd);
        let convex = orient(pa, pb, pd) > 0.0 && orient(pa, pd, pc) > 0.0;
        if !convex {
            return false;
        }
        s > 0.0 || (s == 0.0 && a.min(d) < b.min(c))
    }

    /// Lawson flips until every unlocked interior edge is locally Delaunay.
    fn legalize_all(&mut self, locked: &HashSet<(usize, usize)>) {
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for t in 0..self.tris.len() {
            if self.alive[t] {
                for i in 0..3 {
                    stack.push((t, i));
                }
            }
        }
        let cap = 50 * stack.len() + 1000;
        let mut flips = 0;
        while let Some((t, i)) = stack.pop() {
            if !self.alive[t] || self.nbr[t][i] == NONE {
                continue;
            }
            let b = self.tris[t][(i + 1) % 3];
            let c = self.tris[t][(i + 2) % 3];
            if locked.contains(&(b.min(c), b.max(c))) || !self.wants_flip(t, i) {
                continue;
            }
            let u = self.flip(t, i);
            flips += 1;
            if flips > cap {
                log::warn!("edge legalization hit its flip cap");
                break;
            }
            for k in 0..3 {
                stack.push((t, k));
                stack.push((u, k));
            }
        }
    }

    /// Drop every triangle using one of the three enclosing vertices.
    fn remove_super(&mut self) {
        let n = self.n_input();
        for t in 0..self.tris.len() {
            if self.alive[t] && self.tris[t].iter().any(|&v| v >= n) {
                for k in 0..3 {
                    let m = self.nbr[t][k];
                    self.replace_nbr(m, t, NONE);
                }
                self.kill(t);
            }
        }
        self.refresh_vtri();
    }

    fn refresh_vtri(&mut self) {
        self.vtri.iter_mut().for_each(|x| *x = NONE);
        for t in 0..self.tris.len() {
            if self.alive[t] {
                for v in self.tris[t] {
                    self.vtri[v] = t;
                }
            }
        }
    }

    /// Fill reflex pockets along the outer boundary so that the triangulation
    /// covers the convex hull.
    fn fill_hull(&mut self) {
        loop {
            // boundary edge (u, w) keyed by start vertex u, with its triangle
            let mut next_edge: Vec<(usize, usize, usize)> = vec![(NONE, NONE, NONE); self.pts.len()];
            for t in 0..self.tris.len() {
                if !self.alive[t] {
                    continue;
                }
                for k in 0..3 {
                    if self.nbr[t][k] == NONE {
                        let u = self.tris[t][(k + 1) % 3];
                        let w = self.tris[t][(k + 2) % 3];
                        next_edge[u] = (w, t, k);
                    }
                }
            }
            let mut added = false;
            for a in 0..self.pts.len() {
                let (b, t1, k1) = next_edge[a];
                if b == NONE || !self.alive[t1] || self.nbr[t1][k1] != NONE {
                    continue;
                }
                let (c, t2, k2) = next_edge[b];
                if c == NONE || c == a || !self.alive[t2] || self.nbr[t2][k2] != NONE {
                    continue;
                }
                if orient(self.pts[a], self.pts[b], self.pts[c]) < 0.0 {
                    // new triangle (a, c, b): edge opposite a is (c, b), opposite c is (b, a)
                    let t = self.alloc([a, c, b], [t2, t1, NONE]);
                    self.nbr[t1][k1] = t;
                    self.nbr[t2][k2] = t;
                    added = true;
                }
            }
            if !added {
                break;
            }
            self.legalize_all(&HashSet::new());
        }
    }

    /// Triangles around vertex `v` as `(triangle, local index of v)`.
    fn star(&self, v: usize) -> Vec<(usize, usize)> {
        let t0 = self.vtri[v];
        if t0 == NONE {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut t = t0;
        // counter-clockwise: cross the edge (v, next) — opposite of the third vertex
        loop {
            let i = self.local_index(t, v);
            out.push((t, i));
            let n = self.nbr[t][(i + 2) % 3];
            if n == NONE {
                break;
            }
            if n == t0 {
                return out;
            }
            t = n;
        }
        // hit a boundary: sweep the other way from the start
        let mut t = t0;
        loop {
            let i = self.local_index(t, v);
            let n = self.nbr[t][(i + 1) % 3];
            if n == NONE {
                break;
            }
            t = n;
            let j = self.local_index(t, v);
            out.push((t, j));
        }
        out
    }

    fn find_edge(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        for (t, i) in self.star(a) {
            let tri = self.tris[t];
            if tri[(i + 1) % 3] == b {
                return Some((t, (i + 2) % 3));
            }
            if tri[(i + 2) % 3] == b {
                return Some((t, (i + 1) % 3));
            }
        }
        None
    }

    /// Make `(p, q)` an edge by flipping the edges it crosses.
    fn recover_segment(&mut self, p: usize, q: usize, segment: usize) -> Result<(), TriangulationError> {
        if self.find_edge(p, q).is_some() {
            return Ok(());
        }
        let fail = |reason: &str| TriangulationError::BoundaryRecovery {
            segment,
            reason: reason.to_string(),
        };
        let (pp, pq) = (self.pts[p], self.pts[q]);

        // the triangle at p through which the segment leaves
        let mut first = None;
        for (t, i) in self.star(p) {
            let b = self.tris[t][(i + 1) % 3];
            let c = self.tris[t][(i + 2) % 3];
            let ob = orient(pp, pq, self.pts[b]);
            let oc = orient(pp, pq, self.pts[c]);
            for (x, o) in [(b, ob), (c, oc)] {
                let along = geometry::dot(geometry::sub(self.pts[x], pp), geometry::sub(pq, pp));
                if o == 0.0 && along > 0.0 && along < geometry::dist2(pp, pq) {
                    return Err(fail(&format!("vertex {x} lies on the segment")));
                }
            }
            if ob < 0.0 && oc > 0.0 {
                first = Some((t, b, c));
                break;
            }
        }
        let (mut t, mut right, mut left) = first.ok_or_else(|| fail("segment leaves the triangulation"))?;

        let mut crossing = VecDeque::new();
        loop {
            crossing.push_back((right, left));
            // edge (right, left) is opposite the vertex after `left`
            let k = (0..3)
                .find(|&k| {
                    let tri = self.tris[t];
                    let e = [tri[(k + 1) % 3], tri[(k + 2) % 3]];
                    (e[0] == right && e[1] == left) || (e[0] == left && e[1] == right)
                })
                .expect("crossed edge");
            let u = self.nbr[t][k];
            if u == NONE {
                return Err(fail("segment leaves the triangulation"));
            }
            let j = (0..3).find(|&m| self.nbr[u][m] == t).expect("mutual neighbors");
            let d = self.tris[u][j];
            if d == q {
                break;
            }
            let od = orient(pp, pq, self.pts[d]);
            if od == 0.0 {
                return Err(fail(&format!("vertex {d} lies on the segment")));
            }
            if od > 0.0 {
                left = d;
            } else {
                right = d;
            }
            t = u;
        }

        let cap = 100 * crossing.len() * crossing.len() + 100;
        let mut iterations = 0;
        while let Some((x, y)) = crossing.pop_front() {
            iterations += 1;
            if iterations > cap {
                return Err(fail("flip sequence did not terminate"));
            }
            let (t, i) = self.find_edge(x, y).ok_or_else(|| fail("lost a crossing edge"))?;
            let u = self.nbr[t][i];
            let a = self.tris[t][i];
            let b = self.tris[t][(i + 1) % 3];
            let c = self.tris[t][(i + 2) % 3];
            let j = (0..3).find(|&m| self.nbr[u][m] == t).expect("mutual neighbors");
            let d = self.tris[u][j];
            let [pa, pb, pc, pd] = [a, b, c, d].map(|v| self.pts[v]);
            if orient(pa, pb, pd) > 0.0 && orient(pa, pd, pc) > 0.0 {
                self.flip(t, i);
                let touches = a == p || a == q || d == p || d == q;
                if !touches && geometry::segments_cross(pp, pq, pa, pd) {
                    crossing.push_back((a, d));
                }
            } else {
                crossing.push_back((x, y));
            }
        }
        if self.find_edge(p, q).is_none() {
            return Err(fail("segment missing after flips"));
        }
        Ok(())
    }

    /// Compact to alive triangles, optionally keeping only those accepted by `keep`.
    fn finish(&self, mut keep: impl FnMut(Point) -> bool) -> Vec<[usize; 3]> {
        (0..self.tris.len())
            .filter(|&t| self.alive[t])
            .filter(|&t| {
                let [a, b, c] = self.tris[t].map(|v| self.pts[v]);
                keep(geometry::centroid(a, b, c))
            })
            .map(|t| self.tris[t])
            .collect()
    }
}

/// Hilbert-curve index of `(x, y)` on a `2^16 × 2^16` grid.
fn hilbert_index(mut x: u32, mut y: u32) -> u64 {
    let n: u32 = 1 << 16;
    let mut d: u64 = 0;
    let mut s = n / 2;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += u64::from(s) * u64::from(s) * u64::from((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

fn insertion_order(points: &[Point]) -> Vec<usize> {
    let (lo, hi) = geometry::bounding_box(points);
    let w = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = 65535.0 / w;
    let mut keyed: Vec<(u64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let x = ((p[0] - lo[0]) * scale) as u32;
            let y = ((p[1] - lo[1]) * scale) as u32;
            (hilbert_index(x.min(65535), y.min(65535)), i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

fn check_duplicates(points: &[Point]) -> Result<(), TriangulationError> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j][0] - points[i][0] > DUPLICATE_TOL {
                break;
            }
            if dist(points[i], points[j]) <= DUPLICATE_TOL {
                return Err(TriangulationError::DuplicatePoint(i.min(j), i.max(j)));
            }
        }
    }
    Ok(())
}

fn check_not_collinear(points: &[Point]) -> Result<(), TriangulationError> {
    if points.len() < 3 {
        return Err(TriangulationError::TooFewPoints(points.len()));
    }
    let a = points[0];
    let b = points[1];
    if points[2..].iter().all(|&c| orient(a, b, c) == 0.0) {
        return Err(TriangulationError::Collinear);
    }
    Ok(())
}

fn build(points: &[Point]) -> Triangulation {
    let mut tr = Triangulation::with_super_triangle(points);
    let mut last = 0;
    for v in insertion_order(points) {
        last = tr.insert(v, last);
    }
    tr.remove_super();
    tr.fill_hull();
    tr.legalize_all(&HashSet::new());
    tr
}

/// Delaunay triangulation of the convex hull of `points`. Vertex order is
/// preserved; every vertex is flagged interior and no domain is attached.
pub fn delaunay(points: &[Point]) -> Result<Mesh, TriangulationError> {
    check_not_collinear(points)?;
    check_duplicates(points)?;
    let tr = build(points);
    let tris = tr.finish(|_| true);
    let mesh = Mesh::with_longest_edges(
        points.to_vec(),
        tris,
        vec![BoundaryFlag::Interior; points.len()],
        None,
    )?;
    Ok(mesh)
}

/// Classify a point lying on the domain boundary.
fn boundary_flag_of(domain: &PolygonDomain, p: Point, tol: f64) -> Option<BoundaryFlag> {
    if let Some(c) = domain.corner_at(p, tol) {
        return Some(BoundaryFlag::Corner(c));
    }
    let (d, s) = domain.boundary_distance(p);
    (d <= tol).then_some(BoundaryFlag::Segment(s))
}

/// Boundary-conforming Delaunay triangulation of `domain`.
///
/// The output lists `boundary_points` first, then `interior_points`, each in
/// the order given. Boundary points must include every domain corner.
pub fn conforming_delaunay(
    domain: Arc<PolygonDomain>,
    interior_points: &[Point],
    boundary_points: &[Point],
) -> Result<Mesh, TriangulationError> {
    let tol = BOUNDARY_TOL * domain.diameter().max(1.0);
    let mut flags = Vec::with_capacity(boundary_points.len() + interior_points.len());
    for (index, &p) in boundary_points.iter().enumerate() {
        let f = boundary_flag_of(&domain, p, tol).ok_or(TriangulationError::OffBoundary {
            index,
            x: p[0],
            y: p[1],
        })?;
        flags.push(f);
    }
    for (index, &p) in interior_points.iter().enumerate() {
        if !domain.contains(p) || domain.boundary_distance(p).0 <= DUPLICATE_TOL {
            return Err(TriangulationError::Containment {
                index,
                x: p[0],
                y: p[1],
            });
        }
        flags.push(BoundaryFlag::Interior);
    }

    // consecutive boundary samples along every segment
    let nb = boundary_points.len();
    let mut constraints = Vec::new();
    for (s, seg) in domain.segments().iter().enumerate() {
        let start = (0..nb).find(|&i| flags[i] == BoundaryFlag::Corner(seg.start_corner));
        let end = (0..nb).find(|&i| flags[i] == BoundaryFlag::Corner(seg.end_corner));
        let (Some(start), Some(end)) = (start, end) else {
            return Err(TriangulationError::BoundaryRecovery {
                segment: s,
                reason: "segment endpoints are not among the boundary points".into(),
            });
        };
        let dir = geometry::sub(seg.end, seg.start);
        let mut on: Vec<(f64, usize)> = (0..nb)
            .filter(|&i| flags[i] == BoundaryFlag::Segment(s))
            .map(|i| (geometry::dot(geometry::sub(boundary_points[i], seg.start), dir), i))
            .collect();
        on.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let chain: Vec<usize> = std::iter::once(start)
            .chain(on.into_iter().map(|x| x.1))
            .chain(std::iter::once(end))
            .collect();
        for w in chain.windows(2) {
            constraints.push((w[0], w[1], s));
        }
    }

    let points: Vec<Point> = boundary_points.iter().chain(interior_points).copied().collect();
    check_not_collinear(&points)?;
    check_duplicates(&points)?;
    let mut tr = build(&points);

    let mut locked = HashSet::new();
    for &(a, b, s) in &constraints {
        tr.recover_segment(a, b, s)?;
        locked.insert((a.min(b), a.max(b)));
    }
    tr.legalize_all(&locked);

    let tris = tr.finish(|c| domain.contains(c));
    if tris.is_empty() {
        return Err(TriangulationError::Internal("no triangle inside the domain".into()));
    }
    let mesh = Mesh::with_longest_edges(points, tris, flags, Some(domain))?;
    Ok(mesh)
}

/// Corners plus equally spaced samples on every segment, no farther apart than `spacing`.
pub fn sample_boundary(domain: &PolygonDomain, spacing: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for seg in domain.segments() {
        let len = dist(seg.start, seg.end);
        let n = (len / spacing).ceil().max(1.0) as usize;
        for k in 0..n {
            out.push(geometry::lerp(seg.start, seg.end, k as f64 / n as f64));
        }
    }
    out
}

/// Conforming Delaunay mesh with the boundary sampled at `spacing`.
pub fn conforming_delaunay_with_spacing(
    domain: Arc<PolygonDomain>,
    interior_points: &[Point],
    spacing: f64,
) -> Result<Mesh, TriangulationError> {
    let boundary = sample_boundary(&domain, spacing);
    conforming_delaunay(domain, interior_points, &boundary)
}

/// Grid points at `spacing` strictly inside `domain`, boundary sampled at the same spacing.
pub fn structured_mesh(domain: Arc<PolygonDomain>, spacing: f64) -> Result<Mesh, TriangulationError> {
    let (lo, hi) = domain.bounding_box();
    let nx = ((hi[0] - lo[0]) / spacing).round() as usize;
    let ny = ((hi[1] - lo[1]) / spacing).round() as usize;
    let tol = 1e-9 * spacing;
    let mut interior = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let p = [lo[0] + i as f64 * spacing, lo[1] + j as f64 * spacing];
            if domain.contains(p) && domain.boundary_distance(p).0 > tol {
                interior.push(p);
            }
        }
    }
    conforming_delaunay_with_spacing(domain, &interior, spacing)
}
