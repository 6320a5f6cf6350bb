//! Per-triangle geometry and closed-form element integrals for P1 hat
//! functions and lowest-order Whitney edge functions.

use crate::mesh::Point;

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Scalar cross product `a₁b₂ − a₂b₁`.
#[inline]
pub fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Vector curl of a scalar with the given gradient: `(∂₂f, −∂₁f)`.
#[inline]
pub fn rot(g: [f64; 2]) -> [f64; 2] {
    [g[1], -g[0]]
}

/// ∫_T λ_i λ_j divided by the area.
#[inline]
pub fn lambda_product(i: usize, j: usize) -> f64 {
    if i == j {
        1.0 / 6.0
    } else {
        1.0 / 12.0
    }
}

#[derive(Clone, Debug)]
pub struct Element {
    pub points: [Point; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grads: [[f64; 2]; 3],
    /// Local edge k as an oriented pair (a, b) of local vertices, running
    /// from the lower to the higher global vertex index.
    pub pairs: [(usize, usize); 3],
}

impl Element {
    pub fn new(points: [Point; 3], pairs: [(usize, usize); 3]) -> Element {
        let [p0, p1, p2] = points;
        let twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        let grads = [
            [(p1[1] - p2[1]) / twice, (p2[0] - p1[0]) / twice],
            [(p2[1] - p0[1]) / twice, (p0[0] - p2[0]) / twice],
            [(p0[1] - p1[1]) / twice, (p1[0] - p0[0]) / twice],
        ];
        Element {
            points,
            area: 0.5 * twice,
            grads,
            pairs,
        }
    }

    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let l1 = dot(self.grads[1], [x[0] - self.points[0][0], x[1] - self.points[0][1]]);
        let l2 = dot(self.grads[2], [x[0] - self.points[0][0], x[1] - self.points[0][1]]);
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn from_barycentric(&self, l: [f64; 3]) -> Point {
        let p = &self.points;
        [
            l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
            l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
        ]
    }

    /// Whitney function of local edge `k` evaluated at barycentric point `l`.
    pub fn whitney(&self, k: usize, l: [f64; 3]) -> [f64; 2] {
        let (a, b) = self.pairs[k];
        let (ga, gb) = (self.grads[a], self.grads[b]);
        [l[a] * gb[0] - l[b] * ga[0], l[a] * gb[1] - l[b] * ga[1]]
    }

    /// Constant scalar curl of the Whitney function of local edge `k`.
    pub fn whitney_curl(&self, k: usize) -> f64 {
        let (a, b) = self.pairs[k];
        2.0 * cross(self.grads[a], self.grads[b])
    }

    /// ∫_T w_k.
    pub fn whitney_integral(&self, k: usize) -> [f64; 2] {
        let (a, b) = self.pairs[k];
        let s = self.area / 3.0;
        [
            s * (self.grads[b][0] - self.grads[a][0]),
            s * (self.grads[b][1] - self.grads[a][1]),
        ]
    }

    /// ∫_T w_k · w_m, exact.
    pub fn whitney_mass(&self, k: usize, m: usize) -> f64 {
        let (a, b) = self.pairs[k];
        let (c, d) = self.pairs[m];
        let g = &self.grads;
        self.area
            * (lambda_product(a, c) * dot(g[b], g[d]) - lambda_product(a, d) * dot(g[b], g[c])
                - lambda_product(b, c) * dot(g[a], g[d])
                + lambda_product(b, d) * dot(g[a], g[c]))
    }

    /// ∫_T ∇λ_i · ∇λ_j.
    pub fn stiffness(&self, i: usize, j: usize) -> f64 {
        self.area * dot(self.grads[i], self.grads[j])
    }

    /// ∫_T λ_i λ_j.
    pub fn nodal_mass(&self, i: usize, j: usize) -> f64 {
        self.area * lambda_product(i, j)
    }
}

/// Degree-5 seven-point rule on the reference triangle: barycentric
/// coordinates and weights summing to one.
pub const QUADRATURE_7: [([f64; 3], f64); 7] = {
    const A: f64 = 0.059_715_871_789_770;
    const B: f64 = 0.470_142_064_105_115;
    const C: f64 = 0.797_426_985_353_087;
    const D: f64 = 0.101_286_507_323_456;
    const WA: f64 = 0.132_394_152_788_506;
    const WC: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A, B, B], WA),
        ([B, A, B], WA),
        ([B, B, A], WA),
        ([C, D, D], WC),
        ([D, C, D], WC),
        ([D, D, C], WC),
    ]
};
