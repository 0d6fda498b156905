//! Benchmark problems with known solutions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::estimate::EstimatorKind;
use crate::fem::{CoefficientField, ExactSolution, ProblemSpec};
use crate::geometry::{Point, PolygonDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkId {
    /// `u = cos πx cos πy` on the unit square.
    SquareSmooth,
    /// `u = r^{2/3} sin(2θ/3)` on the L-shape, harmonic.
    LShape,
    /// `u = atan(S(r' − π/3))`, `S = 60`, on the unit square.
    InnerLayer,
    /// Two sharp peaks with `A = 10 cos y · I` on `[−1, 1]²`.
    Peak,
}

pub const ALL_BENCHMARKS: [BenchmarkId; 4] = [
    BenchmarkId::SquareSmooth,
    BenchmarkId::LShape,
    BenchmarkId::InnerLayer,
    BenchmarkId::Peak,
];

impl BenchmarkId {
    pub fn name(self) -> &'static str {
        match self {
            Self::SquareSmooth => "square-smooth",
            Self::LShape => "lshape",
            Self::InnerLayer => "inner-layer",
            Self::Peak => "peak",
        }
    }

    pub fn default_tol(self) -> f64 {
        match self {
            Self::SquareSmooth | Self::LShape => 0.01,
            Self::InnerLayer => 0.5,
            Self::Peak => 20.0,
        }
    }

    /// Vertex count of the initial CVDT mesh.
    pub fn default_n0(self) -> usize {
        match self {
            Self::SquareSmooth => 289,
            Self::LShape => 216,
            Self::InnerLayer => 76,
            Self::Peak => 280,
        }
    }

    /// Spacing of the structured start mesh used by standard AFEM.
    pub fn initial_spacing(self) -> f64 {
        match self {
            Self::SquareSmooth | Self::InnerLayer => 0.125,
            Self::LShape => 0.5,
            Self::Peak => 0.25,
        }
    }

    /// Estimator matching the benchmark's error norm.
    pub fn default_estimator(self) -> EstimatorKind {
        match self {
            Self::Peak => EstimatorKind::WeightedRecovery,
            _ => EstimatorKind::Recovery,
        }
    }

    pub fn problem(self) -> ProblemSpec {
        match self {
            Self::SquareSmooth => square_smooth(),
            Self::LShape => lshape(),
            Self::InnerLayer => inner_layer(),
            Self::Peak => peak(),
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_BENCHMARKS
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown benchmark `{s}`"))
    }
}

pub fn square_smooth() -> ProblemSpec {
    let u = |p: Point| (PI * p[0]).cos() * (PI * p[1]).cos();
    ProblemSpec::manufactured(
        Arc::new(PolygonDomain::unit_square()),
        CoefficientField::identity(),
        Arc::new(move |p| 2.0 * PI * PI * u(p)),
        ExactSolution {
            u: Arc::new(u),
            grad: Arc::new(|p: Point| {
                let (sx, cx) = (PI * p[0]).sin_cos();
                let (sy, cy) = (PI * p[1]).sin_cos();
                [-PI * sx * cy, -PI * cx * sy]
            }),
        },
    )
}

/// Polar angle in `[0, 2π)`.
fn angle(p: Point) -> f64 {
    let t = p[1].atan2(p[0]);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

pub fn lshape() -> ProblemSpec {
    ProblemSpec::manufactured(
        Arc::new(PolygonDomain::l_shape()),
        CoefficientField::identity(),
        Arc::new(|_| 0.0),
        ExactSolution {
            u: Arc::new(|p: Point| {
                let r = p[0].hypot(p[1]);
                r.powf(2.0 / 3.0) * (2.0 * angle(p) / 3.0).sin()
            }),
            grad: Arc::new(|p: Point| {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    return [f64::INFINITY, f64::INFINITY];
                }
                let t = angle(p) / 3.0;
                let s = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
                [-s * t.sin(), s * t.cos()]
            }),
        },
    )
}

const LAYER_S: f64 = 60.0;
const LAYER_CENTER: Point = [1.25, -0.25];

pub fn inner_layer() -> ProblemSpec {
    let radius = |p: Point| (p[0] - LAYER_CENTER[0]).hypot(p[1] - LAYER_CENTER[1]);
    // u = g(r) with g(r) = atan(S(r − π/3))
    let g1 = |r: f64| {
        let s = LAYER_S * (r - PI / 3.0);
        LAYER_S / (1.0 + s * s)
    };
    let g2 = |r: f64| {
        let s = LAYER_S * (r - PI / 3.0);
        -2.0 * LAYER_S * LAYER_S * s / (1.0 + s * s).powi(2)
    };
    ProblemSpec::manufactured(
        Arc::new(PolygonDomain::unit_square()),
        CoefficientField::identity(),
        Arc::new(move |p| {
            let r = radius(p);
            -(g2(r) + g1(r) / r)
        }),
        ExactSolution {
            u: Arc::new(move |p| (LAYER_S * (radius(p) - PI / 3.0)).atan()),
            grad: Arc::new(move |p| {
                let r = radius(p);
                let d = g1(r) / r;
                [d * (p[0] - LAYER_CENTER[0]), d * (p[1] - LAYER_CENTER[1])]
            }),
        },
    )
}

const PEAK_EPS: f64 = 0.01;
const PEAKS: [(Point, f64); 2] = [([-0.5, 0.5], 1.0), ([0.5, -0.5], -1.0)];

fn peak_q(p: Point, c: Point) -> f64 {
    (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + PEAK_EPS
}

pub fn peak() -> ProblemSpec {
    let a = |p: Point| 10.0 * p[1].cos();
    let grad_a = |p: Point| [0.0, -10.0 * p[1].sin()];
    let grad_u = |p: Point| {
        let mut g = [0.0; 2];
        for (c, sign) in PEAKS {
            let q = peak_q(p, c);
            g[0] -= sign * 2.0 * (p[0] - c[0]) / (q * q);
            g[1] -= sign * 2.0 * (p[1] - c[1]) / (q * q);
        }
        g
    };
    let lap_u = |p: Point| {
        PEAKS
            .iter()
            .map(|&(c, sign)| {
                let q = peak_q(p, c);
                sign * (-4.0 / (q * q) + 8.0 * (q - PEAK_EPS) / (q * q * q))
            })
            .sum::<f64>()
    };
    ProblemSpec::manufactured(
        Arc::new(PolygonDomain::rectangle(-1.0, -1.0, 1.0, 1.0)),
        CoefficientField::scalar(Arc::new(a), Some(Arc::new(grad_a))),
        Arc::new(move |p| {
            let ga = grad_a(p);
            let gu = grad_u(p);
            -(a(p) * lap_u(p) + ga[0] * gu[0] + ga[1] * gu[1])
        }),
        ExactSolution {
            u: Arc::new(|p| PEAKS.iter().map(|&(c, sign)| sign / peak_q(p, c)).sum()),
            grad: Arc::new(grad_u),
        },
    )
}
