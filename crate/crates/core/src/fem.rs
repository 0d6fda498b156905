//! P1 finite elements for `-∇·(A∇u) = f` with Dirichlet data `u = g`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{Point, PolygonDomain};
use crate::mesh::Mesh;
use crate::quadrature::{QuadRule, DEGREE4, EDGE_MIDPOINT};

pub mod sparse;

pub use sparse::{conjugate_gradient, CgOutcome, CsrMatrix};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;

/// Relative residual at which the CG solve stops.
pub const CG_TOLERANCE: f64 = 1e-12;
/// Step of the central differences used when `A` has no analytic divergence.
pub const DIVERGENCE_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("coefficient is not symmetric positive definite at ({x}, {y})")]
    Coefficient { x: f64, y: f64 },
    #[error("CG did not converge in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("problem has no exact solution to measure errors against")]
    MissingExactSolution,
    #[error("expected a {expected}-component function, got {got}")]
    Components { expected: usize, got: usize },
    #[error("function belongs to a different mesh")]
    MeshMismatch,
}

/// The diffusion tensor `A(x)`, symmetric positive definite.
#[derive(Clone)]
pub struct CoefficientField {
    eval: MatrixFn,
    divergence: Option<VectorFn>,
    constant: bool,
    identity: bool,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("constant", &self.constant)
            .field("identity", &self.identity)
            .field("analytic_divergence", &self.divergence.is_some())
            .finish()
    }
}

impl CoefficientField {
    pub fn identity() -> Self {
        Self {
            eval: Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]]),
            divergence: None,
            constant: true,
            identity: true,
        }
    }

    pub fn constant(m: [[f64; 2]; 2]) -> Self {
        Self {
            eval: Arc::new(move |_| m),
            divergence: None,
            constant: true,
            identity: m == [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// `a(x)·I`. For a scalar multiple of the identity the row divergence is `∇a`.
    pub fn scalar(a: ScalarFn, grad_a: Option<VectorFn>) -> Self {
        Self {
            eval: Arc::new(move |p| {
                let v = a(p);
                [[v, 0.0], [0.0, v]]
            }),
            divergence: grad_a,
            constant: false,
            identity: false,
        }
    }

    /// General tensor field with optional row divergence
    /// `(∂ₓa₁₁ + ∂ᵧa₂₁, ∂ₓa₁₂ + ∂ᵧa₂₂)`.
    pub fn matrix(eval: MatrixFn, divergence: Option<VectorFn>) -> Self {
        Self {
            eval,
            divergence,
            constant: false,
            identity: false,
        }
    }

    #[inline]
    pub fn eval(&self, p: Point) -> [[f64; 2]; 2] {
        (self.eval)(p)
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn has_analytic_divergence(&self) -> bool {
        self.constant || self.divergence.is_some()
    }

    /// Row divergence of `A`: exact zero for constant fields, analytic when
    /// provided, otherwise `None`.
    pub fn divergence(&self, p: Point) -> Option<Point> {
        if self.constant {
            Some([0.0, 0.0])
        } else {
            self.divergence.as_ref().map(|d| d(p))
        }
    }

    /// Row divergence by central differences with step `h`.
    pub fn divergence_fd(&self, p: Point, h: f64) -> Point {
        let ax = |dx: f64| self.eval([p[0] + dx, p[1]]);
        let ay = |dy: f64| self.eval([p[0], p[1] + dy]);
        let (xp, xm, yp, ym) = (ax(h), ax(-h), ay(h), ay(-h));
        let dx = |i: usize, j: usize| (xp[i][j] - xm[i][j]) / (2.0 * h);
        let dy = |i: usize, j: usize| (yp[i][j] - ym[i][j]) / (2.0 * h);
        [dx(0, 0) + dy(1, 0), dx(0, 1) + dy(1, 1)]
    }

    /// `A(p)` after checking symmetry and positive definiteness.
    pub fn eval_checked(&self, p: Point) -> Result<[[f64; 2]; 2], FemError> {
        let a = self.eval(p);
        let scale = a[0][0].abs().max(a[1][1].abs()).max(f64::MIN_POSITIVE);
        let symmetric = (a[0][1] - a[1][0]).abs() <= 1e-12 * scale;
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if !(symmetric && a[0][0] > 0.0 && det > 0.0) {
            return Err(FemError::Coefficient { x: p[0], y: p[1] });
        }
        Ok(a)
    }
}

/// `v·A·w`.
#[inline]
pub fn a_inner(a: &[[f64; 2]; 2], v: Point, w: Point) -> f64 {
    v[0] * (a[0][0] * w[0] + a[0][1] * w[1]) + v[1] * (a[1][0] * w[0] + a[1][1] * w[1])
}

#[inline]
pub fn a_apply(a: &[[f64; 2]; 2], v: Point) -> Point {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub grad: VectorFn,
}

/// Domain, coefficient and data of one boundary value problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub domain: Arc<PolygonDomain>,
    pub coefficient: CoefficientField,
    pub source: ScalarFn,
    pub dirichlet: ScalarFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("domain", &self.domain)
            .field("coefficient", &self.coefficient)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    /// A problem manufactured from a known solution: `g = u` on the boundary.
    pub fn manufactured(
        domain: Arc<PolygonDomain>,
        coefficient: CoefficientField,
        source: ScalarFn,
        exact: ExactSolution,
    ) -> Self {
        Self {
            domain,
            coefficient,
            source,
            dirichlet: exact.u.clone(),
            exact: Some(exact),
        }
    }
}

/// A continuous piecewise-linear function, scalar or vector valued, stored
/// as nodal values (`values[v * components + c]`).
#[derive(Debug, Clone)]
pub struct FeFunction {
    pub mesh: Arc<Mesh>,
    pub components: usize,
    pub values: Vec<f64>,
}

impl FeFunction {
    pub fn scalar(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.num_vertices());
        Self {
            mesh,
            components: 1,
            values,
        }
    }

    pub fn vector(mesh: Arc<Mesh>, values: Vec<Point>) -> Self {
        assert_eq!(values.len(), mesh.num_vertices());
        Self {
            mesh,
            components: 2,
            values: values.into_iter().flatten().collect(),
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.vertices.iter().map(|&p| f(p)).collect();
        Self::scalar(mesh, values)
    }

    #[inline]
    pub fn nodal(&self, v: usize) -> &[f64] {
        &self.values[v * self.components..(v + 1) * self.components]
    }

    /// Constant gradient of a scalar function on triangle `t`.
    pub fn gradient(&self, t: usize) -> Point {
        debug_assert_eq!(self.components, 1);
        let g = self.mesh.basis_gradients(t);
        let tri = self.mesh.triangles[t];
        let mut out = [0.0; 2];
        for k in 0..3 {
            let u = self.values[tri[k]];
            out[0] += u * g[k][0];
            out[1] += u * g[k][1];
        }
        out
    }

    /// Value of a vector function at barycentric coordinates `bary` of `t`.
    pub fn vector_at(&self, t: usize, bary: [f64; 3]) -> Point {
        debug_assert_eq!(self.components, 2);
        let tri = self.mesh.triangles[t];
        let mut out = [0.0; 2];
        for k in 0..3 {
            let v = self.nodal(tri[k]);
            out[0] += bary[k] * v[0];
            out[1] += bary[k] * v[1];
        }
        out
    }

    /// Value of a scalar function at barycentric coordinates `bary` of `t`.
    pub fn scalar_at(&self, t: usize, bary: [f64; 3]) -> f64 {
        let tri = self.mesh.triangles[t];
        (0..3).map(|k| bary[k] * self.values[tri[k]]).sum()
    }

    pub fn same_mesh(&self, other: &FeFunction) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }
}

/// Assembled stiffness system before Dirichlet elimination.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub mesh: Arc<Mesh>,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Prescribed value for each constrained vertex.
    pub dirichlet: Vec<Option<f64>>,
}

/// Sparsity pattern of the P1 stiffness matrix: vertex pairs sharing a triangle.
fn stiffness_pattern(mesh: &Mesh) -> CsrMatrix {
    let n = mesh.num_vertices();
    let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for tri in &mesh.triangles {
        for &a in tri {
            for &b in tri {
                adj[a].push(b);
            }
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for row in adj.iter_mut() {
        row.sort_unstable();
        row.dedup();
        col_idx.extend_from_slice(row);
        row_ptr.push(col_idx.len());
    }
    let nnz = col_idx.len();
    CsrMatrix::from_parts(n, row_ptr, col_idx, vec![0.0; nnz])
}

/// Element stiffness `∫_T A∇φ_j·∇φ_i` with the edge-midpoint rule.
pub fn element_stiffness(
    mesh: &Mesh,
    t: usize,
    coefficient: &CoefficientField,
) -> Result<[[f64; 3]; 3], FemError> {
    let g = mesh.basis_gradients(t);
    let area = mesh.area(t);
    let mut a_mean = [[0.0; 2]; 2];
    for (x, _, w) in EDGE_MIDPOINT.nodes(mesh.points(t)) {
        let a = coefficient.eval_checked(x)?;
        for i in 0..2 {
            for j in 0..2 {
                a_mean[i][j] += w * a[i][j];
            }
        }
    }
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * a_inner(&a_mean, g[i], g[j]);
        }
    }
    Ok(k)
}

/// Assemble the stiffness matrix and load vector; every boundary vertex is
/// constrained to the nodal value of the Dirichlet data.
pub fn assemble(mesh: Arc<Mesh>, problem: &ProblemSpec) -> Result<SparseSystem, FemError> {
    let mut matrix = stiffness_pattern(&mesh);
    let mut rhs = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        let k = element_stiffness(&mesh, t, &problem.coefficient)?;
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                matrix.add(tri[i], tri[j], k[i][j]);
            }
        }
        let area = mesh.area(t);
        for (x, bary, w) in EDGE_MIDPOINT.nodes(mesh.points(t)) {
            let f = (problem.source)(x);
            for i in 0..3 {
                rhs[tri[i]] += area * w * f * bary[i];
            }
        }
    }
    let dirichlet = mesh
        .vertices
        .iter()
        .zip(&mesh.boundary)
        .map(|(&p, f)| f.is_boundary().then(|| (problem.dirichlet)(p)))
        .collect();
    Ok(SparseSystem {
        mesh,
        matrix,
        rhs,
        dirichlet,
    })
}

impl SparseSystem {
    /// Free-vertex block and right-hand side after moving known values across.
    pub fn reduced(&self) -> (CsrMatrix, Vec<f64>, Vec<usize>) {
        let n = self.rhs.len();
        let mut free_index = vec![usize::MAX; n];
        let mut free = Vec::new();
        for i in 0..n {
            if self.dirichlet[i].is_none() {
                free_index[i] = free.len();
                free.push(i);
            }
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut rhs = Vec::with_capacity(free.len());
        for &i in &free {
            let mut b = self.rhs[i];
            for (j, v) in self.matrix.row(i) {
                match self.dirichlet[j] {
                    Some(g) => b -= v * g,
                    None => {
                        col_idx.push(free_index[j]);
                        values.push(v);
                    }
                }
            }
            row_ptr.push(col_idx.len());
            rhs.push(b);
        }
        (
            CsrMatrix::from_parts(free.len(), row_ptr, col_idx, values),
            rhs,
            free,
        )
    }
}

/// Solve the constrained system with Jacobi-preconditioned CG.
pub fn solve(system: &SparseSystem) -> Result<FeFunction, FemError> {
    let (k, b, free) = system.reduced();
    let max_iter = 10 * system.rhs.len().max(1);
    let outcome = conjugate_gradient(&k, &b, None, CG_TOLERANCE, max_iter);
    if !outcome.converged {
        return Err(FemError::NonConvergence {
            iterations: outcome.iterations,
            residual: outcome.relative_residual,
        });
    }
    log::debug!(
        "cg: {} unknowns, {} iterations, residual {:.2e}",
        free.len(),
        outcome.iterations,
        outcome.relative_residual
    );
    let mut values: Vec<f64> = system.dirichlet.iter().map(|d| d.unwrap_or(0.0)).collect();
    for (x, &i) in outcome.solution.iter().zip(&free) {
        values[i] = *x;
    }
    Ok(FeFunction::scalar(system.mesh.clone(), values))
}

/// Assemble and solve in one step.
pub fn solve_problem(mesh: Arc<Mesh>, problem: &ProblemSpec) -> Result<FeFunction, FemError> {
    solve(&assemble(mesh, problem)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// `‖∇u − ∇u_h‖`
    pub grad_l2: f64,
    /// `‖A^{1/2}(∇u − ∇u_h)‖`
    pub weighted_energy: f64,
}

pub fn error_norms(u_h: &FeFunction, problem: &ProblemSpec) -> Result<ErrorNorms, FemError> {
    error_norms_with(u_h, problem, &DEGREE4)
}

/// Gradient error norms with an explicit quadrature rule.
pub fn error_norms_with(
    u_h: &FeFunction,
    problem: &ProblemSpec,
    rule: &QuadRule,
) -> Result<ErrorNorms, FemError> {
    if u_h.components != 1 {
        return Err(FemError::Components {
            expected: 1,
            got: u_h.components,
        });
    }
    let exact = problem.exact.as_ref().ok_or(FemError::MissingExactSolution)?;
    let mesh = &u_h.mesh;
    let identity = problem.coefficient.is_identity();
    let (mut plain, mut weighted) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let gh = u_h.gradient(t);
        let area = mesh.area(t);
        for (x, _, w) in rule.nodes(mesh.points(t)) {
            let g = (exact.grad)(x);
            let e = [g[0] - gh[0], g[1] - gh[1]];
            let e2 = e[0] * e[0] + e[1] * e[1];
            plain += area * w * e2;
            weighted += if identity {
                area * w * e2
            } else {
                area * w * a_inner(&problem.coefficient.eval(x), e, e)
            };
        }
    }
    Ok(ErrorNorms {
        grad_l2: plain.sqrt(),
        weighted_energy: weighted.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryFlag;

    fn unit_right_triangle() -> Arc<Mesh> {
        Arc::new(
            Mesh::with_longest_edges(
                vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
                vec![[0, 1, 2]],
                vec![BoundaryFlag::Interior; 3],
                None,
            )
            .unwrap(),
        )
    }

    #[test]
    fn unit_right_triangle_stiffness() {
        let m = unit_right_triangle();
        let k = element_stiffness(&m, 0, &CoefficientField::identity()).unwrap();
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn indefinite_coefficient_is_rejected() {
        let m = unit_right_triangle();
        let a = CoefficientField::constant([[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(
            element_stiffness(&m, 0, &a),
            Err(FemError::Coefficient { .. })
        ));
        let nonsym = CoefficientField::constant([[1.0, 0.1], [0.0, 1.0]]);
        assert!(element_stiffness(&m, 0, &nonsym).is_err());
    }

    #[test]
    fn divergence_by_differences_matches_analytic() {
        let a = CoefficientField::scalar(
            Arc::new(|p: Point| 10.0 * p[1].cos()),
            Some(Arc::new(|p: Point| [0.0, -10.0 * p[1].sin()])),
        );
        let p = [0.3, 0.7];
        let exact = a.divergence(p).unwrap();
        let fd = a.divergence_fd(p, DIVERGENCE_STEP);
        assert!((exact[0] - fd[0]).abs() < 1e-8 && (exact[1] - fd[1]).abs() < 1e-8);
        assert_eq!(CoefficientField::identity().divergence(p), Some([0.0, 0.0]));
        let no_div = CoefficientField::scalar(Arc::new(|p: Point| 1.0 + p[0]), None);
        assert_eq!(no_div.divergence(p), None);
    }

    #[test]
    fn zero_source_gives_zero_load() {
        let d = Arc::new(PolygonDomain::unit_square());
        let mesh = Arc::new(crate::triangulate::structured_mesh(d.clone(), 0.25).unwrap());
        let problem = ProblemSpec {
            domain: d,
            coefficient: CoefficientField::identity(),
            source: Arc::new(|_| 0.0),
            dirichlet: Arc::new(|p: Point| p[0]),
            exact: None,
        };
        let sys = assemble(mesh, &problem).unwrap();
        assert!(sys.rhs.iter().all(|&b| b == 0.0));
        assert!(matches!(
            error_norms(&solve(&sys).unwrap(), &problem),
            Err(FemError::MissingExactSolution)
        ));
    }
}
