//! Gradient recovery and a posteriori error estimators.

use std::sync::Arc;

use thiserror::Error;

use crate::cvt::{normalize_density, CvtError, DensityField};
use crate::fem::{a_inner, a_apply, CoefficientField, FeFunction, FemError, ProblemSpec, DIVERGENCE_STEP};
use crate::geometry::{centroid, Point};
use crate::mesh::{build_edge_table, EdgeTable, Mesh, MeshError};
use crate::quadrature::DEGREE4;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("gradient field and solution live on different meshes")]
    MeshMismatch,
    #[error("coefficient is not constant and has no divergence")]
    MissingDivergence,
    #[error("vertex {0} belongs to no triangle")]
    EmptyPatch(usize),
    #[error("{got} indicators for {expected} triangles")]
    IndicatorLength { got: usize, expected: usize },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Density(#[from] CvtError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Residual,
    Recovery,
    WeightedRecovery,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub kind: EstimatorKind,
    pub per_element: Vec<f64>,
    pub global: f64,
}

impl Estimate {
    pub fn from_squares(kind: EstimatorKind, squares: Vec<f64>) -> Self {
        let global = squares.iter().sum::<f64>().sqrt();
        let per_element = squares.into_iter().map(f64::sqrt).collect();
        Self {
            kind,
            per_element,
            global,
        }
    }
}

/// Solve the 3×3 system `m x = b` by partial pivoting; `None` when a pivot
/// falls below `tol` times the largest diagonal entry.
fn solve3(mut m: [[f64; 3]; 3], mut b: [Point; 3], tol: f64) -> Option<[Point; 3]> {
    let scale = m[0][0].abs().max(m[1][1].abs()).max(m[2][2].abs());
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= tol * scale {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = m[r][col] / m[col][col];
            for c in col..3 {
                m[r][c] -= f * m[col][c];
            }
            b[r] = [b[r][0] - f * b[col][0], b[r][1] - f * b[col][1]];
        }
    }
    let mut x = [[0.0; 2]; 3];
    for r in (0..3).rev() {
        let mut v = b[r];
        for c in r + 1..3 {
            v = [v[0] - m[r][c] * x[c][0], v[1] - m[r][c] * x[c][1]];
        }
        x[r] = [v[0] / m[r][r], v[1] / m[r][r]];
    }
    Some(x)
}

/// Least-squares linear fit to `(centroid, gradient)` samples, evaluated at `z`.
fn patch_fit(z: Point, tris: &[usize], centroids: &[Point], grads: &[Point]) -> Option<Point> {
    if tris.len() < 3 {
        return None;
    }
    let s = tris
        .iter()
        .map(|&t| crate::geometry::dist(centroids[t], z))
        .fold(0.0, f64::max);
    if !(s > 0.0) {
        return None;
    }
    let mut m = [[0.0; 3]; 3];
    let mut b = [[0.0; 2]; 3];
    for &t in tris {
        let c = centroids[t];
        let row = [1.0, (c[0] - z[0]) / s, (c[1] - z[1]) / s];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            b[i][0] += row[i] * grads[t][0];
            b[i][1] += row[i] * grads[t][1];
        }
    }
    solve3(m, b, 1e-10).map(|x| x[0])
}

/// Recovered gradient `G(∇u_h)`: nodal least-squares fits of the elementwise
/// gradients sampled at centroids, interpolated with the P1 basis.
///
/// Interior vertices fit over their one-ring of triangles; boundary vertices,
/// and interior vertices whose one-ring is rank deficient, fit over the
/// two-ring; failing that, the area-weighted mean gradient of the one-ring is
/// used.
pub fn recover_gradient(u_h: &FeFunction) -> Result<FeFunction, EstimateError> {
    if u_h.components != 1 {
        return Err(FemError::Components {
            expected: 1,
            got: u_h.components,
        }
        .into());
    }
    let mesh = &u_h.mesh;
    let patches = mesh.vertex_patches();
    let centroids: Vec<Point> = (0..mesh.num_triangles())
        .map(|t| {
            let [a, b, c] = mesh.points(t);
            centroid(a, b, c)
        })
        .collect();
    let grads: Vec<Point> = (0..mesh.num_triangles()).map(|t| u_h.gradient(t)).collect();

    let mut seen = vec![usize::MAX; mesh.num_triangles()];
    let mut out = Vec::with_capacity(mesh.num_vertices());
    for (v, ring) in patches.iter().enumerate() {
        if ring.is_empty() {
            return Err(EstimateError::EmptyPatch(v));
        }
        let z = mesh.vertices[v];
        let mut g = None;
        if !mesh.boundary[v].is_boundary() {
            g = patch_fit(z, ring, &centroids, &grads);
        }
        if g.is_none() {
            let mut two = Vec::new();
            for &t in ring {
                for &w in &mesh.triangles[t] {
                    for &t2 in &patches[w] {
                        if seen[t2] != v {
                            seen[t2] = v;
                            two.push(t2);
                        }
                    }
                }
            }
            two.sort_unstable();
            g = patch_fit(z, &two, &centroids, &grads);
        }
        let g = g.unwrap_or_else(|| {
            let (mut acc, mut area) = ([0.0; 2], 0.0);
            for &t in ring {
                let a = mesh.area(t);
                acc[0] += a * grads[t][0];
                acc[1] += a * grads[t][1];
                area += a;
            }
            [acc[0] / area, acc[1] / area]
        });
        out.push(g);
    }
    Ok(FeFunction::vector(u_h.mesh.clone(), out))
}

/// `‖G − ∇u_h‖_T`, or `‖A^{1/2}(G − ∇u_h)‖_T` when `weight` is given.
pub fn recovery_estimator(
    u_h: &FeFunction,
    g: &FeFunction,
    weight: Option<&CoefficientField>,
) -> Result<Estimate, EstimateError> {
    if !u_h.same_mesh(g) {
        return Err(EstimateError::MeshMismatch);
    }
    if g.components != 2 {
        return Err(FemError::Components {
            expected: 2,
            got: g.components,
        }
        .into());
    }
    let mesh = &u_h.mesh;
    let weight = weight.filter(|w| !w.is_identity());
    let squares = (0..mesh.num_triangles())
        .map(|t| {
            let gh = u_h.gradient(t);
            let area = mesh.area(t);
            DEGREE4
                .nodes(mesh.points(t))
                .map(|(x, l, w)| {
                    let r = g.vector_at(t, l);
                    let e = [r[0] - gh[0], r[1] - gh[1]];
                    let q = match weight {
                        Some(a) => a_inner(&a.eval(x), e, e),
                        None => e[0] * e[0] + e[1] * e[1],
                    };
                    area * w * q
                })
                .sum()
        })
        .collect();
    let kind = if weight.is_some() {
        EstimatorKind::WeightedRecovery
    } else {
        EstimatorKind::Recovery
    };
    Ok(Estimate::from_squares(kind, squares))
}

/// Elementwise residual `R_T = f + d·∇u_h` at a point, where `d` is the row
/// divergence of `A`.
struct Residual<'a> {
    problem: &'a ProblemSpec,
    numeric_divergence: bool,
}

impl Residual<'_> {
    fn at(&self, x: Point, grad: Point) -> Result<f64, EstimateError> {
        let a = &self.problem.coefficient;
        let d = match a.divergence(x) {
            Some(d) => d,
            None if self.numeric_divergence => a.divergence_fd(x, DIVERGENCE_STEP),
            None => return Err(EstimateError::MissingDivergence),
        };
        Ok((self.problem.source)(x) + d[0] * grad[0] + d[1] * grad[1])
    }
}

/// Normal flux jump of `A∇u_h` across an interior edge, `A` taken at the
/// edge midpoint.
fn flux_jump(u_h: &FeFunction, a: &CoefficientField, edges: &EdgeTable, e: usize) -> f64 {
    let edge = &edges.edges[e];
    let am = a.eval(edge.midpoint);
    let [t0, t1] = edge.triangles;
    let f0 = a_apply(&am, u_h.gradient(t0));
    let f1 = a_apply(&am, u_h.gradient(t1));
    (f0[0] - f1[0]) * edge.normal[0] + (f0[1] - f1[1]) * edge.normal[1]
}

/// `η_T² = h_T²‖R_T‖²_T + Σ_{e⊂∂T} h_e‖J_e‖²_e`, with the jump vanishing on
/// boundary edges. Missing divergences of `A` are approximated by central
/// differences.
pub fn residual_estimator(u_h: &FeFunction, problem: &ProblemSpec) -> Result<Estimate, EstimateError> {
    residual_estimator_with(u_h, problem, true)
}

pub fn residual_estimator_with(
    u_h: &FeFunction,
    problem: &ProblemSpec,
    numeric_divergence: bool,
) -> Result<Estimate, EstimateError> {
    let mesh = &u_h.mesh;
    let edges = build_edge_table(mesh)?;
    let residual = Residual {
        problem,
        numeric_divergence,
    };
    let mut squares = Vec::with_capacity(mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let gh = u_h.gradient(t);
        let h = mesh.diameter(t);
        let area = mesh.area(t);
        let mut r2 = 0.0;
        for (x, _, w) in DEGREE4.nodes(mesh.points(t)) {
            let r = residual.at(x, gh)?;
            r2 += area * w * r * r;
        }
        squares.push(h * h * r2);
    }
    for (e, edge) in edges.edges.iter().enumerate().filter(|(_, e)| e.interior) {
        let j = flux_jump(u_h, &problem.coefficient, &edges, e);
        // J is constant along the edge: h_e ∫_e J² = h_e² J²
        let contrib = edge.length * edge.length * j * j;
        squares[edge.triangles[0]] += contrib;
        squares[edge.triangles[1]] += contrib;
    }
    Ok(Estimate::from_squares(EstimatorKind::Residual, squares))
}

/// `h_T²‖R_T − mean(R_T)‖²_T` for every triangle.
fn local_oscillation(u_h: &FeFunction, problem: &ProblemSpec) -> Result<Vec<f64>, EstimateError> {
    let mesh = &u_h.mesh;
    let residual = Residual {
        problem,
        numeric_divergence: true,
    };
    (0..mesh.num_triangles())
        .map(|t| {
            let gh = u_h.gradient(t);
            let area = mesh.area(t);
            let samples = DEGREE4
                .nodes(mesh.points(t))
                .map(|(x, _, w)| Ok((w, residual.at(x, gh)?)))
                .collect::<Result<Vec<_>, EstimateError>>()?;
            let mean: f64 = samples.iter().map(|(w, r)| w * r).sum();
            let var: f64 = samples.iter().map(|(w, r)| w * (r - mean) * (r - mean)).sum();
            let h = mesh.diameter(t);
            Ok(h * h * area * var)
        })
        .collect()
}

/// `osc(f, ω_T)` where `ω_T` is `T` together with its edge neighbors.
pub fn oscillation(u_h: &FeFunction, problem: &ProblemSpec) -> Result<Vec<f64>, EstimateError> {
    let mesh = &u_h.mesh;
    let local = local_oscillation(u_h, problem)?;
    let edges = build_edge_table(mesh)?;
    Ok((0..mesh.num_triangles())
        .map(|t| {
            let mut s = local[t];
            for i in 0..3 {
                if let Some(n) = edges.neighbor(t, i) {
                    s += local[n];
                }
            }
            s.sqrt()
        })
        .collect())
}

/// Per-vertex `(1/|ω_i|) Σ_{T∈ω_i} η_T²/h_T⁴` before normalization.
pub fn raw_density(mesh: &Mesh, indicators: &[f64]) -> Result<Vec<f64>, EstimateError> {
    raw_density_with(mesh, indicators, 2)
}

/// Patch mean of `η_T^power / h_T⁴`.
pub fn raw_density_with(mesh: &Mesh, indicators: &[f64], power: i32) -> Result<Vec<f64>, EstimateError> {
    if indicators.len() != mesh.num_triangles() {
        return Err(EstimateError::IndicatorLength {
            got: indicators.len(),
            expected: mesh.num_triangles(),
        });
    }
    let per_tri: Vec<f64> = indicators
        .iter()
        .enumerate()
        .map(|(t, eta)| {
            let h2 = mesh.diameter(t).powi(2);
            eta.powi(power) / (h2 * h2)
        })
        .collect();
    mesh.vertex_patches()
        .iter()
        .enumerate()
        .map(|(v, patch)| {
            if patch.is_empty() {
                return Err(EstimateError::EmptyPatch(v));
            }
            Ok(patch.iter().map(|&t| per_tri[t]).sum::<f64>() / patch.len() as f64)
        })
        .collect()
}

/// Estimator-driven density on `mesh`, normalized to mean one and floored.
pub fn density_from_indicators(mesh: Arc<Mesh>, est: &Estimate) -> Result<DensityField, EstimateError> {
    density_from_indicators_with(mesh, est, 2)
}

/// As [`density_from_indicators`] with `η_T^power` in place of `η_T²`.
pub fn density_from_indicators_with(
    mesh: Arc<Mesh>,
    est: &Estimate,
    power: i32,
) -> Result<DensityField, EstimateError> {
    let raw = raw_density_with(&mesh, &est.per_element, power)?;
    Ok(DensityField::new(mesh, normalize_density(&raw))?)
}
