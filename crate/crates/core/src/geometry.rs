//! Planar geometry: points, robust predicates and polygonal domains.

use robust::Coord;
use thiserror::Error;

/// A point (or vector) in the plane.
pub type Point = [f64; 2];

#[inline]
fn coord(p: Point) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
///
/// Uses adaptive exact arithmetic, so the sign is always correct.
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `(a, b, c)`, zero when cocircular.
#[inline]
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    robust::incircle(coord(a), coord(b), coord(c), coord(d))
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

#[inline]
pub fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Signed area of a triangle (positive for counter-clockwise orientation).
#[inline]
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

#[inline]
pub fn centroid(a: Point, b: Point, c: Point) -> Point {
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

/// Signed area enclosed by a closed loop (shoelace formula).
pub fn loop_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut s = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

/// Distance from `p` to the segment `[a, b]`, together with the clamped
/// parameter of the closest point.
pub fn segment_distance(p: Point, a: Point, b: Point) -> (f64, f64) {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (dist(p, lerp(a, b, t)), t)
}

/// Whether the open segments `(p, q)` and `(a, b)` cross at a single interior point.
pub fn segments_cross(p: Point, q: Point, a: Point, b: Point) -> bool {
    let o1 = orient(p, q, a);
    let o2 = orient(p, q, b);
    let o3 = orient(a, b, p);
    let o4 = orient(a, b, q);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("loop {0} has fewer than 3 vertices")]
    TooFewVertices(usize),
    #[error("outer loop must be counter-clockwise (signed area {0})")]
    OuterOrientation(f64),
    #[error("hole {index} must be clockwise (signed area {area})")]
    HoleOrientation { index: usize, area: f64 },
    #[error("boundary segments {0} and {1} intersect")]
    SelfIntersection(usize, usize),
    #[error("hole {0} is not strictly inside the outer loop")]
    HoleOutside(usize),
}

/// One straight piece of the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
    /// Global index of the corner at `start`.
    pub start_corner: usize,
    /// Global index of the corner at `end`.
    pub end_corner: usize,
}

/// A polygon with holes. The outer loop runs counter-clockwise and every hole
/// clockwise, so the domain always lies to the left of each boundary segment.
///
/// Corners are numbered globally: the outer loop first, then each hole in
/// order. Segment `s` starts at corner `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonDomain {
    outer: Vec<Point>,
    holes: Vec<Vec<Point>>,
    segments: Vec<Segment>,
    corners: Vec<Point>,
}

impl PolygonDomain {
    pub fn new(outer: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self, DomainError> {
        if outer.len() < 3 {
            return Err(DomainError::TooFewVertices(0));
        }
        let area = loop_area(&outer);
        if area <= 0.0 {
            return Err(DomainError::OuterOrientation(area));
        }
        for (i, h) in holes.iter().enumerate() {
            if h.len() < 3 {
                return Err(DomainError::TooFewVertices(i + 1));
            }
            let a = loop_area(h);
            if a >= 0.0 {
                return Err(DomainError::HoleOrientation { index: i, area: a });
            }
        }

        let mut segments = Vec::new();
        let mut corners = Vec::new();
        for lp in std::iter::once(&outer).chain(holes.iter()) {
            let base = corners.len();
            let n = lp.len();
            for i in 0..n {
                corners.push(lp[i]);
                segments.push(Segment {
                    start: lp[i],
                    end: lp[(i + 1) % n],
                    start_corner: base + i,
                    end_corner: base + (i + 1) % n,
                });
            }
        }

        for i in 0..segments.len() {
            for j in (i + 1)..segments.len() {
                let (si, sj) = (&segments[i], &segments[j]);
                let adjacent = si.end_corner == sj.start_corner || sj.end_corner == si.start_corner;
                if adjacent {
                    continue;
                }
                if segments_cross(si.start, si.end, sj.start, sj.end)
                    || segment_distance(sj.start, si.start, si.end).0 == 0.0
                    || segment_distance(si.start, sj.start, sj.end).0 == 0.0
                {
                    return Err(DomainError::SelfIntersection(i, j));
                }
            }
        }

        let domain = Self {
            outer,
            holes,
            segments,
            corners,
        };
        for (i, h) in domain.holes.iter().enumerate() {
            if !h.iter().all(|&p| point_in_loop(p, &domain.outer)) {
                return Err(DomainError::HoleOutside(i));
            }
        }
        Ok(domain)
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]], vec![])
            .expect("rectangle with positive extent")
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 0.0, 1.0, 1.0)
    }

    /// `(-1, 1)² \ (0, 1) × (-1, 0)`.
    pub fn l_shape() -> Self {
        Self::new(
            vec![
                [-1.0, -1.0],
                [0.0, -1.0],
                [0.0, 0.0],
                [1.0, 0.0],
                [1.0, 1.0],
                [-1.0, 1.0],
            ],
            vec![],
        )
        .expect("valid L-shape")
    }

    pub fn outer(&self) -> &[Point] {
        &self.outer
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn corners(&self) -> &[Point] {
        &self.corners
    }

    pub fn area(&self) -> f64 {
        loop_area(&self.outer) + self.holes.iter().map(|h| loop_area(h)).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.segments.iter().map(|s| dist(s.start, s.end)).sum()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        bounding_box(&self.outer)
    }

    /// Characteristic length used to scale geometric tolerances.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        dist(lo, hi)
    }

    /// Even-odd point-in-polygon test over every loop (ray casting).
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = point_in_loop(p, &self.outer);
        for h in &self.holes {
            if point_in_loop(p, h) {
                inside = !inside;
            }
        }
        inside
    }

    /// Distance from `p` to the boundary, with the index of the closest segment.
    pub fn boundary_distance(&self, p: Point) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, s) in self.segments.iter().enumerate() {
            let d = segment_distance(p, s.start, s.end).0;
            if d < best.0 {
                best = (d, i);
            }
        }
        best
    }

    /// Index of the corner at `p` within `tol`, if any.
    pub fn corner_at(&self, p: Point, tol: f64) -> Option<usize> {
        self.corners.iter().position(|&c| dist(c, p) <= tol)
    }

    /// Index of the segment joining two corners, in either direction.
    pub fn segment_between_corners(&self, a: usize, b: usize) -> Option<usize> {
        self.segments.iter().position(|s| {
            (s.start_corner == a && s.end_corner == b) || (s.start_corner == b && s.end_corner == a)
        })
    }

    /// The two segments meeting at corner `c`: `(incoming, outgoing)`.
    pub fn segments_at_corner(&self, c: usize) -> (usize, usize) {
        let outgoing = c;
        let incoming = self
            .segments
            .iter()
            .position(|s| s.end_corner == c)
            .expect("every corner ends a segment");
        (incoming, outgoing)
    }
}

fn point_in_loop(p: Point, lp: &[Point]) -> bool {
    let n = lp.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (lp[i], lp[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn bounding_box(points: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}
