//! Parametric supports of the perturbation `κ = κ₀(1 + a·χ_D)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{CoefficientField, C64};
use crate::mesh::{Mesh2D, Point};

/// Angular grid used for radius positivity checks and boundary polylines.
pub const ANGLE_GRID: usize = 720;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    Ball {
        center: Point,
        r: f64,
    },
    /// Axis-aligned ellipse.
    Ellipse {
        center: Point,
        rx: f64,
        ry: f64,
    },
    /// Star-shaped region `|x − c| < r0 + Σ aₙ cos nθ + bₙ sin nθ` in polar
    /// coordinates about `center`.
    FourierStar {
        center: Point,
        r0: f64,
        coeffs: Vec<(f64, f64)>,
    },
    Union {
        parts: Vec<Support>,
    },
}

/// How the indicator of a support is sampled on a triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// 1 if the centroid is inside, 0 otherwise.
    Centroid,
    /// Fraction of the `4^levels` sub-triangle centroids that are inside.
    Subdivided { levels: u32 },
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Subdivided { levels: 3 }
    }
}

impl Support {
    pub fn ball(center: Point, r: f64) -> Support {
        Support::Ball { center, r }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            Support::Ball { center, r } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) < *r
            }
            Support::Ellipse { center, rx, ry } => {
                let (u, v) = ((p[0] - center[0]) / rx, (p[1] - center[1]) / ry);
                u * u + v * v < 1.0
            }
            Support::FourierStar { center, .. } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx.hypot(dy) < self.star_radius(dy.atan2(dx))
            }
            Support::Union { parts } => parts.iter().any(|s| s.contains(p)),
        }
    }

    /// Boundary radius of a star at polar angle `theta`; `r` for a ball.
    pub fn star_radius(&self, theta: f64) -> f64 {
        match self {
            Support::FourierStar { r0, coeffs, .. } => {
                r0 + coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let n = (k + 1) as f64;
                        a * (n * theta).cos() + b * (n * theta).sin()
                    })
                    .sum::<f64>()
            }
            Support::Ball { r, .. } => *r,
            _ => f64::NAN,
        }
    }

    /// Checks radii and, for stars, positivity of the radius on the angular
    /// grid.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        match self {
            Support::Ball { r, .. } if !(*r > 0.0) => bad(format!("ball radius {r} must be positive")),
            Support::Ellipse { rx, ry, .. } if !(*rx > 0.0 && *ry > 0.0) => {
                bad(format!("ellipse radii ({rx}, {ry}) must be positive"))
            }
            Support::FourierStar { r0, .. } => {
                if !(*r0 > 0.0) {
                    return bad(format!("star base radius {r0} must be positive"));
                }
                for k in 0..ANGLE_GRID {
                    let t = 2.0 * PI * k as f64 / ANGLE_GRID as f64;
                    let r = self.star_radius(t);
                    if !(r > 0.0) {
                        return bad(format!("star radius {r} at angle {t:.4} is not positive"));
                    }
                }
                Ok(())
            }
            Support::Union { parts } => {
                if parts.is_empty() {
                    return bad("empty union".into());
                }
                parts.iter().try_for_each(Support::validate)
            }
            _ => Ok(()),
        }
    }

    /// Axis-aligned bounding box `[xmin, ymin, xmax, ymax]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        match self {
            Support::Ball { center, r } => [center[0] - r, center[1] - r, center[0] + r, center[1] + r],
            Support::Ellipse { center, rx, ry } => {
                [center[0] - rx, center[1] - ry, center[0] + rx, center[1] + ry]
            }
            Support::FourierStar { center, r0, coeffs } => {
                let rmax = r0 + coeffs.iter().map(|(a, b)| a.hypot(*b)).sum::<f64>();
                [center[0] - rmax, center[1] - rmax, center[0] + rmax, center[1] + rmax]
            }
            Support::Union { parts } => parts.iter().map(Support::bounding_box).fold(
                [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
                |a, b| [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])],
            ),
        }
    }

    /// Points on the boundary of each component, `ANGLE_GRID` per component.
    pub fn boundary_points(&self) -> Vec<Point> {
        let angles = (0..ANGLE_GRID).map(|k| 2.0 * PI * k as f64 / ANGLE_GRID as f64);
        match self {
            Support::Ball { center, r } => angles
                .map(|t| [center[0] + r * t.cos(), center[1] + r * t.sin()])
                .collect(),
            Support::Ellipse { center, rx, ry } => angles
                .map(|t| [center[0] + rx * t.cos(), center[1] + ry * t.sin()])
                .collect(),
            Support::FourierStar { center, .. } => angles
                .map(|t| {
                    let r = self.star_radius(t);
                    [center[0] + r * t.cos(), center[1] + r * t.sin()]
                })
                .collect(),
            Support::Union { parts } => parts.iter().flat_map(Support::boundary_points).collect(),
        }
    }

    /// Largest distance from the origin reached by the region.
    pub fn max_extent(&self) -> f64 {
        match self {
            Support::Ball { center, r } => center[0].hypot(center[1]) + r,
            Support::Union { parts } => parts.iter().map(Support::max_extent).fold(0.0, f64::max),
            _ => self
                .boundary_points()
                .iter()
                .map(|p| p[0].hypot(p[1]))
                .fold(0.0, f64::max),
        }
    }

    /// Valid and strictly inside the disk of radius `r_known`, the inner
    /// radius of the neighborhood where κ is known.
    pub fn is_admissible(&self, r_known: f64) -> bool {
        self.validate().is_ok() && self.max_extent() < r_known
    }

    /// Center of a single-component support; `None` for unions.
    pub fn center(&self) -> Option<Point> {
        match self {
            Support::Ball { center, .. }
            | Support::Ellipse { center, .. }
            | Support::FourierStar { center, .. } => Some(*center),
            Support::Union { .. } => None,
        }
    }

    pub fn area_fraction(&self, tri: [Point; 3], sampling: Sampling) -> f64 {
        let bb = self.bounding_box();
        let tb = [
            tri[0][0].min(tri[1][0]).min(tri[2][0]),
            tri[0][1].min(tri[1][1]).min(tri[2][1]),
            tri[0][0].max(tri[1][0]).max(tri[2][0]),
            tri[0][1].max(tri[1][1]).max(tri[2][1]),
        ];
        if tb[2] < bb[0] || tb[0] > bb[2] || tb[3] < bb[1] || tb[1] > bb[3] {
            return 0.0;
        }
        match sampling {
            Sampling::Centroid => {
                let c = [
                    (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0,
                    (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0,
                ];
                if self.contains(c) {
                    1.0
                } else {
                    0.0
                }
            }
            Sampling::Subdivided { levels } => {
                // barycentric lattice of step 1/n; sub-triangle centroids
                let n = 1usize << levels;
                let inv = 1.0 / n as f64;
                let point = |l1: f64, l2: f64| {
                    let l0 = 1.0 - l1 - l2;
                    [
                        l0 * tri[0][0] + l1 * tri[1][0] + l2 * tri[2][0],
                        l0 * tri[0][1] + l1 * tri[1][1] + l2 * tri[2][1],
                    ]
                };
                let mut inside = 0usize;
                for i in 0..n {
                    for j in 0..n - i {
                        let (a, b) = (i as f64, j as f64);
                        if self.contains(point((a + 1.0 / 3.0) * inv, (b + 1.0 / 3.0) * inv)) {
                            inside += 1;
                        }
                        if i + j + 1 < n && self.contains(point((a + 2.0 / 3.0) * inv, (b + 2.0 / 3.0) * inv)) {
                            inside += 1;
                        }
                    }
                }
                inside as f64 / (n * n) as f64
            }
        }
    }

    /// Per-triangle indicator of the support.
    pub fn indicator(&self, mesh: &Mesh2D, sampling: Sampling) -> Vec<f64> {
        (0..mesh.num_triangles())
            .map(|t| self.area_fraction(mesh.triangle_points(t), sampling))
            .collect()
    }
}

/// `κ₀(1 + a·χ_D)` per triangle.
pub fn perturbed_kappa(
    mesh: &Mesh2D,
    kappa0: C64,
    support: &Support,
    amplitude: f64,
    sampling: Sampling,
) -> CoefficientField {
    CoefficientField::from_values(
        support
            .indicator(mesh, sampling)
            .into_iter()
            .map(|chi| kappa0 * (1.0 + amplitude * chi))
            .collect(),
    )
}

/// Symmetric Hausdorff distance between two point clouds.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let one_sided = |x: &[Point], y: &[Point]| {
        x.iter()
            .map(|p| {
                y.iter()
                    .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}
