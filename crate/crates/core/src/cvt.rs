//! Density-weighted Lloyd iteration on conforming Delaunay meshes.
//!
//! Voronoi cells are approximated by barycentric dual cells: vertex `a` of
//! triangle `abc` owns the quadrilateral `a, m_ab, g, m_ca` (edge midpoints and
//! centroid). On each of the two sub-triangles of that quadrilateral the
//! density is replaced by its linear interpolant through the sub-triangle's
//! corners, so masses and moments are integrated exactly.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{self, centroid, midpoint, signed_area, Point, PolygonDomain};
use crate::mesh::{build_edge_table, BoundaryFlag, Mesh, MeshError};
use crate::quadrature::DEGREE4;
use crate::triangulate::{conforming_delaunay, sample_boundary, TriangulationError};

/// Smallest nodal density after normalization.
pub const DENSITY_FLOOR: f64 = 1e-8;
/// Normalized densities are rounded to multiples of this step.
const DENSITY_QUANTUM: f64 = 1.0 / 4294967296.0;
/// Barycentric slack when locating points in the background mesh.
const LOCATE_TOL: f64 = 1e-9;
const MAX_HALVINGS: usize = 50;

#[derive(Debug, Error)]
pub enum CvtError {
    #[error("density value {value} at vertex {vertex} is not positive")]
    NonPositiveDensity { vertex: usize, value: f64 },
    #[error("density has {got} values for {expected} vertices")]
    DensityLength { got: usize, expected: usize },
    #[error("point ({x}, {y}) lies outside the density's background mesh")]
    Outside { x: f64, y: f64 },
    #[error("mesh has no domain attached")]
    NoDomain,
    #[error("at least one Lloyd iteration is required")]
    NoIterations,
    #[error("{requested} vertices cannot mesh a domain with {corners} corners")]
    TooFewVertices { requested: usize, corners: usize },
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Uniform grid of buckets over the bounding box, each listing the triangles
/// whose bounding boxes overlap it.
#[derive(Debug, Clone)]
struct Locator {
    lo: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    start: Vec<usize>,
    items: Vec<usize>,
}

impl Locator {
    fn new(mesh: &Mesh) -> Self {
        let (lo, hi) = geometry::bounding_box(&mesh.vertices);
        let side = (mesh.num_triangles() as f64 / 2.0).sqrt().ceil().max(1.0) as usize;
        let w = (hi[0] - lo[0]).max(f64::MIN_POSITIVE);
        let h = (hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let dims = [side, side];
        let cell = [w / side as f64, h / side as f64];
        let mut loc = Self {
            lo,
            cell,
            dims,
            start: Vec::new(),
            items: Vec::new(),
        };
        let ranges: Vec<_> = (0..mesh.num_triangles())
            .map(|t| {
                let (a, b) = geometry::bounding_box(&mesh.points(t));
                (loc.cell_of(a), loc.cell_of(b))
            })
            .collect();
        let mut count = vec![0usize; side * side + 1];
        for &(a, b) in &ranges {
            for j in a[1]..=b[1] {
                for i in a[0]..=b[0] {
                    count[j * side + i + 1] += 1;
                }
            }
        }
        for k in 1..count.len() {
            count[k] += count[k - 1];
        }
        let mut fill = count.clone();
        let mut items = vec![0; count[side * side]];
        for (t, &(a, b)) in ranges.iter().enumerate() {
            for j in a[1]..=b[1] {
                for i in a[0]..=b[0] {
                    let k = j * side + i;
                    items[fill[k]] = t;
                    fill[k] += 1;
                }
            }
        }
        loc.start = count;
        loc.items = items;
        loc
    }

    fn cell_of(&self, p: Point) -> [usize; 2] {
        let f = |k: usize| {
            let x = ((p[k] - self.lo[k]) / self.cell[k]).floor();
            x.clamp(0.0, (self.dims[k] - 1) as f64) as usize
        };
        [f(0), f(1)]
    }

    fn candidates(&self, p: Point) -> &[usize] {
        let [i, j] = self.cell_of(p);
        let k = j * self.dims[0] + i;
        &self.items[self.start[k]..self.start[k + 1]]
    }
}

fn barycentric(tri: [Point; 3], p: Point) -> [f64; 3] {
    let area = signed_area(tri[0], tri[1], tri[2]);
    let l0 = signed_area(p, tri[1], tri[2]) / area;
    let l1 = signed_area(tri[0], p, tri[2]) / area;
    [l0, l1, 1.0 - l0 - l1]
}

/// Positive piecewise-linear function on a background mesh.
#[derive(Debug, Clone)]
pub struct DensityField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    locator: Arc<Locator>,
}

impl DensityField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self, CvtError> {
        if values.len() != mesh.num_vertices() {
            return Err(CvtError::DensityLength {
                got: values.len(),
                expected: mesh.num_vertices(),
            });
        }
        if let Some((vertex, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(CvtError::NonPositiveDensity { vertex, value });
        }
        let locator = Arc::new(Locator::new(&mesh));
        Ok(Self {
            mesh,
            values,
            locator,
        })
    }

    pub fn uniform(mesh: Arc<Mesh>) -> Self {
        let values = vec![1.0; mesh.num_vertices()];
        Self::new(mesh, values).expect("constant density is valid")
    }

    /// Nodal interpolant of a positive function.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Result<Self, CvtError> {
        let values = mesh.vertices.iter().map(|&p| f(p)).collect();
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same field multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self, CvtError> {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        if let Some((vertex, &value)) = out.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(CvtError::NonPositiveDensity { vertex, value });
        }
        Ok(out)
    }

    /// Same field normalized by [`normalize_density`].
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        out.values = normalize_density(&self.values);
        out
    }

    /// Containing triangle and barycentric coordinates of `p`.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in self.locator.candidates(p) {
            let l = barycentric(self.mesh.points(t), p);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= 0.0 {
                return Some((t, l));
            }
            if worst >= -LOCATE_TOL && best.is_none_or(|b| worst > b.2) {
                best = Some((t, l, worst));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }

    pub fn eval(&self, p: Point) -> Result<f64, CvtError> {
        let (t, l) = self.locate(p).ok_or(CvtError::Outside { x: p[0], y: p[1] })?;
        let tri = self.mesh.triangles[t];
        Ok((0..3).map(|k| l[k] * self.values[tri[k]]).sum())
    }
}

/// Divide by the mean, round to a fixed binary grid and floor. Rounding makes
/// the result identical for inputs that differ by a constant factor.
pub fn normalize_density(values: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    if !(mean > 0.0) || !mean.is_finite() {
        return vec![1.0; values.len()];
    }
    values
        .iter()
        .map(|v| {
            let q = (v / mean / DENSITY_QUANTUM).round() * DENSITY_QUANTUM;
            q.max(DENSITY_FLOOR)
        })
        .collect()
}

/// Density values at vertices, edge midpoints and centroids of `mesh`.
struct SampledDensity {
    vertex: Vec<f64>,
    edge: Vec<f64>,
    centroid: Vec<f64>,
    triangle_edges: Vec<[usize; 3]>,
}

impl SampledDensity {
    fn new(mesh: &Mesh, density: &DensityField) -> Result<Self, CvtError> {
        let edges = build_edge_table(mesh)?;
        let vertex = mesh
            .vertices
            .iter()
            .map(|&p| density.eval(p))
            .collect::<Result<Vec<_>, _>>()?;
        let edge = edges
            .edges
            .iter()
            .map(|e| density.eval(e.midpoint))
            .collect::<Result<Vec<_>, _>>()?;
        let centroid = (0..mesh.num_triangles())
            .map(|t| {
                let [a, b, c] = mesh.points(t);
                density.eval(centroid(a, b, c))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            vertex,
            edge,
            centroid,
            triangle_edges: edges.triangle_edges,
        })
    }

    /// The two dual sub-triangles of triangle `t` owned by its local vertex
    /// `k`, each with corner densities.
    fn dual_pieces(&self, mesh: &Mesh, t: usize, k: usize) -> [([Point; 3], [f64; 3]); 2] {
        let p = mesh.points(t);
        let tri = mesh.triangles[t];
        let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
        let g = centroid(p[0], p[1], p[2]);
        let m_ab = midpoint(a, b);
        let m_ca = midpoint(c, a);
        let e = self.triangle_edges[t];
        // local edge i is opposite local vertex i
        let r_ab = self.edge[e[(k + 2) % 3]];
        let r_ca = self.edge[e[(k + 1) % 3]];
        let r_a = self.vertex[tri[k]];
        let r_g = self.centroid[t];
        [
            ([a, m_ab, g], [r_a, r_ab, r_g]),
            ([a, g, m_ca], [r_a, r_g, r_ca]),
        ]
    }
}

/// Mass and first moment of a linear density over a triangle.
fn mass_moment(p: [Point; 3], r: [f64; 3]) -> (f64, Point) {
    let area = signed_area(p[0], p[1], p[2]);
    let rs = r[0] + r[1] + r[2];
    let mass = area * rs / 3.0;
    let mut m = [0.0; 2];
    for d in 0..2 {
        let xs = p[0][d] + p[1][d] + p[2][d];
        let rx = r[0] * p[0][d] + r[1] * p[1][d] + r[2] * p[2][d];
        m[d] = area / 12.0 * (rx + rs * xs);
    }
    (mass, m)
}

/// `Σ ∫ ρ |x − z|²` over the dual cells, with `ρ` as sampled by the mesh.
pub fn cvt_energy(mesh: &Mesh, density: &DensityField) -> Result<f64, CvtError> {
    let s = SampledDensity::new(mesh, density)?;
    let mut energy = 0.0;
    for t in 0..mesh.num_triangles() {
        for k in 0..3 {
            let z = mesh.vertices[mesh.triangles[t][k]];
            for (p, r) in s.dual_pieces(mesh, t, k) {
                let area = signed_area(p[0], p[1], p[2]);
                for (x, l, w) in DEGREE4.nodes(p) {
                    let rho = l[0] * r[0] + l[1] * r[1] + l[2] * r[2];
                    energy += area * w * rho * geometry::dist2(x, z);
                }
            }
        }
    }
    Ok(energy)
}

fn boundary_neighbors(mesh: &Mesh) -> Result<Vec<Vec<usize>>, CvtError> {
    let edges = build_edge_table(mesh)?;
    let mut nb = vec![Vec::new(); mesh.num_vertices()];
    for e in edges.edges.iter().filter(|e| e.is_boundary()) {
        let [a, b] = e.vertices;
        nb[a].push(b);
        nb[b].push(a);
    }
    Ok(nb)
}

/// ρ-weighted centroid of the polyline `left → z → right` (two straight pieces).
fn boundary_centroid(left: Point, z: Point, right: Point, density: &DensityField) -> Result<Point, CvtError> {
    const G: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];
    let mut mass = 0.0;
    let mut moment = [0.0; 2];
    for (a, b) in [(left, z), (z, right)] {
        let len = geometry::dist(a, b);
        for g in G {
            let x = geometry::lerp(a, b, g);
            let w = 0.5 * len * density.eval(x)?;
            mass += w;
            moment[0] += w * x[0];
            moment[1] += w * x[1];
        }
    }
    if mass > 0.0 {
        Ok([moment[0] / mass, moment[1] / mass])
    } else {
        Ok(z)
    }
}

fn clearance(domain: &PolygonDomain) -> f64 {
    1e-8 * domain.diameter()
}

/// Move `z` toward `target`, halving the displacement until the point is
/// strictly inside the domain.
fn damped_interior_move(domain: &PolygonDomain, z: Point, target: Point) -> Point {
    let min_dist = clearance(domain);
    let mut d = geometry::sub(target, z);
    for _ in 0..=MAX_HALVINGS {
        let p = [z[0] + d[0], z[1] + d[1]];
        if domain.contains(p) && domain.boundary_distance(p).0 > min_dist {
            return p;
        }
        d = [0.5 * d[0], 0.5 * d[1]];
    }
    z
}

/// One Lloyd step followed by conforming re-triangulation. The output lists
/// boundary vertices first, then interior vertices, each group in input order.
pub fn lloyd_step(mesh: &Mesh, density: &DensityField) -> Result<Mesh, CvtError> {
    let domain = mesh.domain.clone().ok_or(CvtError::NoDomain)?;
    let density = density.normalized();
    let sampled = SampledDensity::new(mesh, &density)?;

    let n = mesh.num_vertices();
    let mut mass = vec![0.0; n];
    let mut moment = vec![[0.0; 2]; n];
    for t in 0..mesh.num_triangles() {
        for k in 0..3 {
            let v = mesh.triangles[t][k];
            if mesh.boundary[v].is_boundary() {
                continue;
            }
            for (p, r) in sampled.dual_pieces(mesh, t, k) {
                let (m, mm) = mass_moment(p, r);
                mass[v] += m;
                moment[v][0] += mm[0];
                moment[v][1] += mm[1];
            }
        }
    }

    let nb = boundary_neighbors(mesh)?;
    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    for v in 0..n {
        let z = mesh.vertices[v];
        match mesh.boundary[v] {
            BoundaryFlag::Corner(_) => boundary.push(z),
            BoundaryFlag::Segment(_) => {
                let p = match nb[v][..] {
                    [l, r] => {
                        let left = midpoint(z, mesh.vertices[l]);
                        let right = midpoint(z, mesh.vertices[r]);
                        boundary_centroid(left, z, right, &density)?
                    }
                    _ => z,
                };
                boundary.push(p);
            }
            BoundaryFlag::Interior => {
                let target = if mass[v] > 0.0 {
                    [moment[v][0] / mass[v], moment[v][1] / mass[v]]
                } else {
                    z
                };
                interior.push(damped_interior_move(&domain, z, target));
            }
        }
    }
    Ok(conforming_delaunay(domain, &interior, &boundary)?)
}

/// `iters ≥ 1` Lloyd steps.
pub fn cfcvdt_optimize(mesh: &Mesh, density: &DensityField, iters: usize) -> Result<Mesh, CvtError> {
    if iters == 0 {
        return Err(CvtError::NoIterations);
    }
    let mut m = lloyd_step(mesh, density)?;
    for _ in 1..iters {
        m = lloyd_step(&m, density)?;
    }
    Ok(m)
}

/// Boundary spacing `h` for which a hexagonal lattice with `h` spacing plus
/// boundary samples gives about `n` vertices: `n = 2A/(√3h²) + P/(2h)`.
fn spacing_for(domain: &PolygonDomain, n: usize) -> f64 {
    let (a, p) = (domain.area(), domain.perimeter());
    let q = 2.0 * a / 3f64.sqrt();
    // n h² − (P/2) h − q = 0
    let b = p / 2.0;
    (b + (b * b + 4.0 * n as f64 * q).sqrt()) / (2.0 * n as f64)
}

/// Quasi-uniform CVDT mesh with exactly `n` vertices: boundary samples plus a
/// clipped hexagonal lattice, topped up or thinned with seeded random points,
/// then `lloyd_iters` uniform Lloyd steps.
pub fn initial_cvdt_mesh(
    domain: Arc<PolygonDomain>,
    n: usize,
    lloyd_iters: usize,
    seed: u64,
) -> Result<Mesh, CvtError> {
    let corners = domain.corners().len();
    if n < corners {
        return Err(CvtError::TooFewVertices {
            requested: n,
            corners,
        });
    }
    let mut h = spacing_for(&domain, n);
    let mut boundary = sample_boundary(&domain, h);
    while boundary.len() > n {
        h *= 1.1;
        boundary = sample_boundary(&domain, h);
    }
    let want = n - boundary.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bounding_box();
    let dy = h * 3f64.sqrt() / 2.0;
    let mut lattice = Vec::new();
    let mut j = 0;
    loop {
        let y = lo[1] + j as f64 * dy;
        if y > hi[1] {
            break;
        }
        let shift = if j % 2 == 1 { 0.5 * h } else { 0.0 };
        let mut i = 0;
        loop {
            let x = lo[0] + shift + i as f64 * h;
            if x > hi[0] {
                break;
            }
            let p = [x, y];
            if domain.contains(p) && domain.boundary_distance(p).0 >= 0.5 * h {
                lattice.push(p);
            }
            i += 1;
        }
        j += 1;
    }
    if lattice.len() > want {
        lattice.shuffle(&mut rng);
        lattice.truncate(want);
    }
    let min_gap = 0.25 * h;
    let mut attempts = 0usize;
    while lattice.len() < want {
        let p = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
        attempts += 1;
        let gap = if attempts < 1000 * want.max(1) { min_gap } else { 1e-6 * h };
        if domain.contains(p)
            && domain.boundary_distance(p).0 >= gap
            && lattice.iter().all(|&q| geometry::dist(p, q) >= gap)
        {
            lattice.push(p);
        }
    }
    let mesh = conforming_delaunay(domain, &lattice, &boundary)?;
    if lloyd_iters == 0 {
        return Ok(mesh);
    }
    let density = DensityField::uniform(Arc::new(mesh.clone()));
    cfcvdt_optimize(&mesh, &density, lloyd_iters)
}
