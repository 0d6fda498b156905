mod common;

use std::sync::Arc;

use common::{random_mesh, unit_square};
use hat_afem::adapt::{bisect, dorfler_mark, midpoint_count};
use hat_afem::cvt::{normalize_density, DENSITY_FLOOR};
use hat_afem::estimate::{recover_gradient, Estimate, EstimatorKind};
use hat_afem::fem::FeFunction;
use hat_afem::geometry::incircle;
use hat_afem::triangulate::delaunay;
use proptest::prelude::*;

fn indicators() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..10.0f64, 1..40).prop_filter("not all zero", |v| v.iter().any(|&x| x > 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dorfler_marks_a_sorted_prefix_reaching_the_fraction(eta in indicators(), theta in 0.05..1.0f64) {
        let marked = dorfler_mark(&eta, theta).unwrap();
        let total: f64 = eta.iter().map(|e| e * e).sum();
        let got: f64 = marked.iter().map(|&i| eta[i] * eta[i]).sum();
        prop_assert!(got >= theta * total * (1.0 - 1e-12));
        // no unmarked element is larger than a marked one
        let smallest = marked.iter().map(|&i| eta[i]).fold(f64::INFINITY, f64::min);
        for (i, e) in eta.iter().enumerate() {
            if !marked.contains(&i) {
                prop_assert!(*e <= smallest);
            }
        }
        prop_assert!(marked.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn midpoint_count_respects_half_mass(rho in prop::collection::vec(0.001..5.0f64, 1..60)) {
        let n = midpoint_count(&rho);
        prop_assert!(n >= 1 && n <= rho.len());
        let mut sorted = rho.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let half = 0.5 * sorted.iter().sum::<f64>();
        let prefix: f64 = sorted[..n].iter().sum();
        prop_assert!(n == 1 || prefix <= half);
        if n < rho.len() {
            prop_assert!(prefix + sorted[n] > half);
        }
    }

    #[test]
    fn normalized_density_is_positive_and_scale_free(
        v in prop::collection::vec(0.0..100.0f64, 1..50),
        c in 0.01..100.0f64,
    ) {
        let a = normalize_density(&v);
        prop_assert!(a.iter().all(|&x| x >= DENSITY_FLOOR));
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        let b = normalize_density(&scaled);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-6 || v.iter().all(|&x| x == 0.0));
        // agreement up to one rounding quantum
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 2f64.powi(-31));
        }
    }

    #[test]
    fn estimate_global_is_root_sum_of_squares(sq in prop::collection::vec(0.0..1e3f64, 1..100)) {
        let est = Estimate::from_squares(EstimatorKind::Recovery, sq.clone());
        let s: f64 = sq.iter().sum();
        prop_assert!((est.global * est.global - s).abs() <= 1e-12 * s.max(1e-300));
        for (e, q) in est.per_element.iter().zip(&sq) {
            prop_assert!((e * e - q).abs() <= 1e-12 * q.max(1e-300));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn delaunay_has_empty_circumcircles(pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 3..80)) {
        let points: Vec<_> = pts.iter().map(|&(x, y)| [x, y]).collect();
        if let Ok(mesh) = delaunay(&points) {
            for t in &mesh.triangles {
                let [a, b, c] = t.map(|v| mesh.vertices[v]);
                for (i, &p) in mesh.vertices.iter().enumerate() {
                    if !t.contains(&i) {
                        prop_assert!(incircle(a, b, c, p) <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn bisection_preserves_conformity_and_area(seed in 0u64..1000, picks in prop::collection::vec(any::<prop::sample::Index>(), 0..20)) {
        let mesh = random_mesh(unit_square(), 0.25, 20, seed);
        let mut marked: Vec<usize> = picks.iter().map(|i| i.index(mesh.num_triangles())).collect();
        marked.sort_unstable();
        marked.dedup();
        let out = bisect(&mesh, &marked).unwrap();
        out.validate().unwrap();
        prop_assert!((out.total_area() - 1.0).abs() < 1e-12);
        prop_assert!(out.num_vertices() >= mesh.num_vertices() + usize::from(!marked.is_empty()));
    }

    #[test]
    fn recovery_reproduces_linear_fields(seed in 0u64..1000, a in -5.0..5.0f64, b in -5.0..5.0f64) {
        let mesh = Arc::new(random_mesh(unit_square(), 0.2, 30, seed));
        let u = FeFunction::interpolate(mesh.clone(), |p| a * p[0] + b * p[1] + 1.0);
        let g = recover_gradient(&u).unwrap();
        for v in 0..mesh.num_vertices() {
            let x = g.nodal(v);
            prop_assert!((x[0] - a).abs() < 1e-9 && (x[1] - b).abs() < 1e-9);
        }
    }
}
