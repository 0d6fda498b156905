#![allow(dead_code)]

use std::sync::Arc;

use hat_afem::geometry::{Point, PolygonDomain};
use hat_afem::triangulate::{conforming_delaunay, sample_boundary};
use hat_afem::Mesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Points drawn uniformly from `domain`, at least `gap` from its boundary.
pub fn random_inside(domain: &PolygonDomain, n: usize, gap: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bounding_box();
    let mut out = Vec::new();
    while out.len() < n {
        let p = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
        if domain.contains(p) && domain.boundary_distance(p).0 > gap {
            out.push(p);
        }
    }
    out
}

/// A conforming Delaunay mesh of `domain` from boundary samples at `spacing`
/// plus `n` random interior points.
pub fn random_mesh(domain: Arc<PolygonDomain>, spacing: f64, n: usize, seed: u64) -> Mesh {
    let boundary = sample_boundary(&domain, spacing);
    let interior = random_inside(&domain, n, 0.3 * spacing, seed);
    conforming_delaunay(domain, &interior, &boundary).unwrap()
}

pub fn unit_square() -> Arc<PolygonDomain> {
    Arc::new(PolygonDomain::unit_square())
}

pub fn l_shape() -> Arc<PolygonDomain> {
    Arc::new(PolygonDomain::l_shape())
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(data: &[(f64, f64)]) -> f64 {
    let n = data.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in data {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
