mod common;

use std::sync::Arc;

use common::{loglog_slope, random_mesh, unit_square};
use hat_afem::benchmarks::{lshape, square_smooth, ALL_BENCHMARKS};
use hat_afem::estimate::{
    density_from_indicators, oscillation, raw_density, recover_gradient, recovery_estimator, residual_estimator,
    residual_estimator_with, Estimate, EstimateError, EstimatorKind,
};
use hat_afem::fem::{error_norms, solve_problem, CoefficientField, ExactSolution, FeFunction, ProblemSpec};
use hat_afem::geometry::Point;
use hat_afem::triangulate::structured_mesh;
use hat_afem::{BoundaryFlag, Mesh};

fn corners(n: usize) -> Vec<BoundaryFlag> {
    (0..n).map(BoundaryFlag::Corner).collect()
}

/// Unit square split along the diagonal from (0,0) to (1,1).
fn two_triangle_square() -> Arc<Mesh> {
    Arc::new(
        Mesh::with_longest_edges(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            corners(4),
            None,
        )
        .unwrap(),
    )
}

fn poisson(source: impl Fn(Point) -> f64 + Send + Sync + 'static) -> ProblemSpec {
    ProblemSpec {
        domain: unit_square(),
        coefficient: CoefficientField::identity(),
        source: Arc::new(source),
        dirichlet: Arc::new(|_| 0.0),
        exact: None,
    }
}

#[test]
fn quadratic_is_differentiated_exactly_at_a_symmetric_patch_center() {
    let mesh = Arc::new(structured_mesh(unit_square(), 0.125).unwrap());
    let u = FeFunction::interpolate(mesh.clone(), |p| p[0] * p[0]);
    let g = recover_gradient(&u).unwrap();
    let center = mesh
        .vertices
        .iter()
        .position(|p| (p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12)
        .unwrap();
    let gz = g.nodal(center);
    assert!((gz[0] - 1.0).abs() < 1e-10, "{gz:?}");
    assert!(gz[1].abs() < 1e-10);
}

#[test]
fn linear_solution_has_zero_residual_estimate() {
    let problem = ProblemSpec::manufactured(
        unit_square(),
        CoefficientField::identity(),
        Arc::new(|_| 0.0),
        ExactSolution {
            u: Arc::new(|p: Point| 0.5 - p[0] + 4.0 * p[1]),
            grad: Arc::new(|_| [-1.0, 4.0]),
        },
    );
    let mesh = Arc::new(random_mesh(unit_square(), 0.2, 40, 2));
    let u_h = FeFunction::interpolate(mesh, |p| (problem.exact.as_ref().unwrap().u)(p));
    assert!(residual_estimator(&u_h, &problem).unwrap().global < 1e-12);
    let g = recover_gradient(&u_h).unwrap();
    assert!(recovery_estimator(&u_h, &g, None).unwrap().global < 1e-12);
}

#[test]
fn kink_across_the_diagonal_matches_hand_calculation() {
    // u_h = y on the lower triangle and x on the upper one: the gradient
    // jumps by (−1, 1), the normal flux by √2, and h_e‖J‖²_e = √2·√2·2 = 4
    let mesh = two_triangle_square();
    let u_h = FeFunction::scalar(mesh, vec![0.0, 0.0, 1.0, 0.0]);
    let est = residual_estimator(&u_h, &poisson(|_| 0.0)).unwrap();
    for eta in &est.per_element {
        assert!((eta * eta - 4.0).abs() < 1e-12, "{eta}");
    }
    assert!((est.global - 8f64.sqrt()).abs() < 1e-12);
}

#[test]
fn recovery_estimate_vanishes_for_its_own_gradient_and_scales_with_weight() {
    let mesh = Arc::new(structured_mesh(unit_square(), 0.25).unwrap());
    let u_h = FeFunction::interpolate(mesh.clone(), |p| 2.0 * p[0] + p[1]);
    let g = FeFunction::vector(mesh.clone(), vec![[2.0, 1.0]; mesh.num_vertices()]);
    assert!(recovery_estimator(&u_h, &g, None).unwrap().global < 1e-14);

    let u_h = FeFunction::interpolate(mesh, |p| (3.0 * p[0]).sin() * p[1] * p[1]);
    let g = recover_gradient(&u_h).unwrap();
    let plain = recovery_estimator(&u_h, &g, None).unwrap();
    let identity = recovery_estimator(&u_h, &g, Some(&CoefficientField::identity())).unwrap();
    assert!((plain.global - identity.global).abs() <= 1e-14 * plain.global);
    let four = CoefficientField::constant([[4.0, 0.0], [0.0, 4.0]]);
    let weighted = recovery_estimator(&u_h, &g, Some(&four)).unwrap();
    assert_eq!(weighted.kind, EstimatorKind::WeightedRecovery);
    assert!((weighted.global - 2.0 * plain.global).abs() <= 1e-12 * plain.global);
}

#[test]
fn recovery_rejects_foreign_gradient() {
    let a = Arc::new(structured_mesh(unit_square(), 0.25).unwrap());
    let b = Arc::new(structured_mesh(unit_square(), 0.25).unwrap());
    let u_h = FeFunction::interpolate(a, |p| p[0]);
    let g = recover_gradient(&FeFunction::interpolate(b, |p| p[0])).unwrap();
    assert!(matches!(recovery_estimator(&u_h, &g, None), Err(EstimateError::MeshMismatch)));
}

#[test]
fn numeric_divergence_can_be_refused() {
    let mut problem = square_smooth();
    problem.coefficient = CoefficientField::scalar(Arc::new(|p: Point| 1.0 + p[0]), None);
    let mesh = Arc::new(structured_mesh(unit_square(), 0.25).unwrap());
    let u_h = solve_problem(mesh, &problem).unwrap();
    assert!(matches!(
        residual_estimator_with(&u_h, &problem, false),
        Err(EstimateError::MissingDivergence)
    ));
    assert!(residual_estimator_with(&u_h, &problem, true).is_ok());
}

#[test]
fn oscillation_of_constant_source_vanishes() {
    let mesh = Arc::new(structured_mesh(unit_square(), 0.25).unwrap());
    let problem = poisson(|_| 3.0);
    let u_h = solve_problem(mesh, &problem).unwrap();
    assert!(oscillation(&u_h, &problem).unwrap().iter().all(|&o| o < 1e-14));
}

#[test]
fn oscillation_of_linear_source_on_one_triangle() {
    // R = x, mean 1/3, ∫_T (x − 1/3)² = 1/36, h_T² = 2
    let mesh = Arc::new(
        Mesh::with_longest_edges(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], corners(3), None).unwrap(),
    );
    let u_h = FeFunction::scalar(mesh, vec![0.0; 3]);
    let osc = oscillation(&u_h, &poisson(|p| p[0])).unwrap();
    assert!((osc[0] - (1.0f64 / 18.0).sqrt()).abs() < 1e-14);
}

#[test]
fn oscillation_decays_like_h_squared() {
    let problem = square_smooth();
    let data: Vec<(f64, f64)> = [0.125, 0.0625, 0.03125]
        .iter()
        .map(|&h| {
            let mesh = Arc::new(structured_mesh(unit_square(), h).unwrap());
            let n = mesh.num_vertices() as f64;
            let u_h = solve_problem(mesh, &problem).unwrap();
            let total: f64 = oscillation(&u_h, &problem).unwrap().iter().map(|o| o * o).sum();
            (n, total.sqrt())
        })
        .collect();
    let slope = loglog_slope(&data);
    assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn density_on_two_triangles_matches_formula() {
    let mesh = Mesh::with_longest_edges(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-2.0, 0.0]],
        vec![[0, 1, 2], [0, 2, 3]],
        corners(4),
        None,
    )
    .unwrap();
    let (e1, e2) = (0.3, 0.7);
    let (q1, q2) = (e1 * e1 / 4.0, e2 * e2 / 25.0);
    let rho = raw_density(&mesh, &[e1, e2]).unwrap();
    let expected = [(q1 + q2) / 2.0, q1, (q1 + q2) / 2.0, q2];
    for (r, x) in rho.iter().zip(expected) {
        assert!((r - x).abs() < 1e-15, "{r} vs {x}");
    }
}

#[test]
fn uniform_indicators_give_unit_density() {
    let mesh = Arc::new(structured_mesh(unit_square(), 0.125).unwrap());
    let est = Estimate::from_squares(EstimatorKind::Recovery, vec![0.01; mesh.num_triangles()]);
    let rho = density_from_indicators(mesh, &est).unwrap();
    assert!(rho.values().iter().all(|&r| r == 1.0));
}

#[test]
fn density_ignores_indicator_scale() {
    let mesh = Arc::new(random_mesh(unit_square(), 0.2, 60, 8));
    let u_h = FeFunction::interpolate(mesh.clone(), |p| (4.0 * p[0]).sin() * (3.0 * p[1]).cos());
    let est = recovery_estimator(&u_h, &recover_gradient(&u_h).unwrap(), None).unwrap();
    let scaled = Estimate {
        per_element: est.per_element.iter().map(|e| 7.3 * e).collect(),
        ..est.clone()
    };
    let a = density_from_indicators(mesh.clone(), &est).unwrap();
    let b = density_from_indicators(mesh, &scaled).unwrap();
    assert_eq!(a.values(), b.values());
}

#[test]
fn lshape_density_peaks_at_the_reentrant_corner() {
    let problem = lshape();
    let mesh = Arc::new(structured_mesh(problem.domain.clone(), 0.125).unwrap());
    let u_h = solve_problem(mesh.clone(), &problem).unwrap();
    let est = recovery_estimator(&u_h, &recover_gradient(&u_h).unwrap(), None).unwrap();
    let rho = density_from_indicators(mesh.clone(), &est).unwrap();
    let (argmax, _) = rho
        .values()
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |best, (i, &r)| if r > best.1 { (i, r) } else { best });
    assert_eq!(mesh.vertices[argmax], [0.0, 0.0]);
}

#[test]
fn residual_estimate_bounds_the_error() {
    for id in ALL_BENCHMARKS {
        let problem = id.problem();
        let mesh = Arc::new(structured_mesh(problem.domain.clone(), id.initial_spacing() / 2.0).unwrap());
        let u_h = solve_problem(mesh, &problem).unwrap();
        let eta = residual_estimator(&u_h, &problem).unwrap().global;
        let err = error_norms(&u_h, &problem).unwrap().grad_l2;
        assert!(eta >= err, "{id}: {eta} < {err}");
    }
}
