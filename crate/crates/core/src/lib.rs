//! Adaptive P1 finite elements for second-order elliptic problems on
//! polygonal domains, driven by gradient-recovery error estimates and
//! centroidal Voronoi–Delaunay mesh optimization.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adapt;
pub mod benchmarks;
pub mod cli;
pub mod cvt;
pub mod estimate;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod triangulate;

pub use geometry::{Point, PolygonDomain};
pub use mesh::{BoundaryFlag, EdgeTable, Mesh};
