//! Symmetric quadrature rules on triangles, in barycentric coordinates.
//!
//! Weights sum to one; multiply by the triangle area.

use crate::geometry::Point;

#[derive(Debug, Clone, Copy)]
pub struct QuadRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
    pub degree: usize,
}

/// Edge midpoints, exact for quadratics.
pub const EDGE_MIDPOINT: QuadRule = QuadRule {
    points: &[[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
    weights: &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    degree: 2,
};

const D4_A: f64 = 0.445_948_490_915_965;
const D4_B: f64 = 0.091_576_213_509_771;
const D4_WA: f64 = 0.223_381_589_678_011;
const D4_WB: f64 = 0.109_951_743_655_322;

/// Six-point rule (Dunavant), exact for polynomials of degree 4.
pub const DEGREE4: QuadRule = QuadRule {
    points: &[
        [D4_A, D4_A, 1.0 - 2.0 * D4_A],
        [D4_A, 1.0 - 2.0 * D4_A, D4_A],
        [1.0 - 2.0 * D4_A, D4_A, D4_A],
        [D4_B, D4_B, 1.0 - 2.0 * D4_B],
        [D4_B, 1.0 - 2.0 * D4_B, D4_B],
        [1.0 - 2.0 * D4_B, D4_B, D4_B],
    ],
    weights: &[D4_WA, D4_WA, D4_WA, D4_WB, D4_WB, D4_WB],
    degree: 4,
};

const D6_A: f64 = 0.249_286_745_170_910;
const D6_B: f64 = 0.063_089_014_491_502;
const D6_C1: f64 = 0.053_145_049_844_817;
const D6_C2: f64 = 0.310_352_451_033_784;
const D6_C3: f64 = 1.0 - D6_C1 - D6_C2;
const D6_WA: f64 = 0.116_786_275_726_379;
const D6_WB: f64 = 0.050_844_906_370_207;
const D6_WC: f64 = 0.082_851_075_618_374;

/// Twelve-point rule (Dunavant), exact for polynomials of degree 6.
pub const DEGREE6: QuadRule = QuadRule {
    points: &[
        [D6_A, D6_A, 1.0 - 2.0 * D6_A],
        [D6_A, 1.0 - 2.0 * D6_A, D6_A],
        [1.0 - 2.0 * D6_A, D6_A, D6_A],
        [D6_B, D6_B, 1.0 - 2.0 * D6_B],
        [D6_B, 1.0 - 2.0 * D6_B, D6_B],
        [1.0 - 2.0 * D6_B, D6_B, D6_B],
        [D6_C1, D6_C2, D6_C3],
        [D6_C1, D6_C3, D6_C2],
        [D6_C2, D6_C1, D6_C3],
        [D6_C2, D6_C3, D6_C1],
        [D6_C3, D6_C1, D6_C2],
        [D6_C3, D6_C2, D6_C1],
    ],
    weights: &[
        D6_WA, D6_WA, D6_WA, D6_WB, D6_WB, D6_WB, D6_WC, D6_WC, D6_WC, D6_WC, D6_WC, D6_WC,
    ],
    degree: 6,
};

impl QuadRule {
    /// Physical quadrature points and barycentric coordinates on triangle `t`.
    pub fn nodes<'a>(
        &'a self,
        t: [Point; 3],
    ) -> impl Iterator<Item = (Point, [f64; 3], f64)> + 'a {
        self.points.iter().zip(self.weights).map(move |(l, &w)| {
            let x = l[0] * t[0][0] + l[1] * t[1][0] + l[2] * t[2][0];
            let y = l[0] * t[0][1] + l[1] * t[1][1] + l[2] * t[2][1];
            ([x, y], *l, w)
        })
    }

    /// `∫_t f` for a triangle of (unsigned) area `area`.
    pub fn integrate(&self, t: [Point; 3], area: f64, mut f: impl FnMut(Point) -> f64) -> f64 {
        let mut s = 0.0;
        for (x, _, w) in self.nodes(t) {
            s += w * f(x);
        }
        s * area
    }
}
