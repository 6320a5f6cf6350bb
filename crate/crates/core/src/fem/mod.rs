//! Finite element spaces and operators: Whitney edge elements for the
//! field, P1 hat functions for its scalar curl.

mod assembly;
pub mod element;
mod factor;
mod sparse;

use std::sync::Arc;

use num_complex::Complex64;

pub use assembly::*;
pub use element::Element;
pub use factor::{factorization_count, Factorization};
pub use sparse::{matmul, SparseComplexMatrix, TripletBuilder};

use crate::error::{Error, Result};
use crate::mesh::{Mesh2D, Point, LOCAL_EDGES};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = Complex64::new(0.0, 0.0);

/// Lowest-order edge element space; one dof per mesh edge, the line
/// integral of the field along the edge from its lower to its higher
/// vertex.
#[derive(Clone, Debug)]
pub struct EdgeSpace {
    mesh: Arc<Mesh2D>,
    elements: Vec<Element>,
}

impl EdgeSpace {
    pub fn new(mesh: Arc<Mesh2D>) -> EdgeSpace {
        let elements = (0..mesh.num_triangles())
            .map(|t| {
                let signs = mesh.triangle_signs(t);
                let pairs = [0, 1, 2].map(|k| {
                    let (a, b) = LOCAL_EDGES[k];
                    if signs[k] > 0 {
                        (a, b)
                    } else {
                        (b, a)
                    }
                });
                Element::new(mesh.triangle_points(t), pairs)
            })
            .collect();
        EdgeSpace { mesh, elements }
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.num_edges()
    }

    pub fn element(&self, t: usize) -> &Element {
        &self.elements[t]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Edge-integral interpolant, using the midpoint rule on each edge
    /// (exact for constant fields).
    pub fn interpolate(&self, f: impl Fn(Point) -> [C64; 2]) -> Vec<C64> {
        let v = self.mesh.vertices();
        self.mesh
            .edges()
            .iter()
            .map(|&[a, b]| {
                let (p, q) = (v[a], v[b]);
                let val = f([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                val[0] * (q[0] - p[0]) + val[1] * (q[1] - p[1])
            })
            .collect()
    }

    /// Coefficients of the field whose tangential component is 1 on every
    /// edge of `tag`, zero on all other edges.
    pub fn tangential_unit_field(&self, tag: &str) -> Result<Vec<C64>> {
        let curve = self.mesh.curve(tag)?;
        let mut x = vec![ZERO; self.dim()];
        for ce in &curve.edges {
            x[ce.edge] = C64::new(ce.orientation * ce.length, 0.0);
        }
        Ok(x)
    }

    /// Tangential component `E·τ` (τ counterclockwise) at the midpoint of
    /// each edge of `tag`, in curve order.
    pub fn tangential_trace(&self, tag: &str, x: &[C64]) -> Result<Vec<C64>> {
        self.check_len(x)?;
        let curve = self.mesh.curve(tag)?;
        Ok(curve
            .edges
            .iter()
            .map(|ce| x[ce.edge] * (ce.orientation / ce.length))
            .collect())
    }

    /// Field value in triangle `t` at barycentric point `l`.
    pub fn evaluate(&self, x: &[C64], t: usize, l: [f64; 3]) -> [C64; 2] {
        let el = &self.elements[t];
        let edges = self.mesh.triangle_edges(t);
        let mut v = [ZERO; 2];
        for k in 0..3 {
            let w = el.whitney(k, l);
            v[0] += x[edges[k]] * w[0];
            v[1] += x[edges[k]] * w[1];
        }
        v
    }

    /// Scalar curl of the field on triangle `t` (constant per triangle).
    pub fn curl(&self, x: &[C64], t: usize) -> C64 {
        let el = &self.elements[t];
        let edges = self.mesh.triangle_edges(t);
        (0..3).map(|k| x[edges[k]] * el.whitney_curl(k)).sum()
    }

    /// L² errors of the field and of its curl against an exact solution,
    /// with a degree-5 rule per triangle.
    pub fn hcurl_errors(
        &self,
        x: &[C64],
        exact: impl Fn(Point) -> [C64; 2],
        exact_curl: impl Fn(Point) -> C64,
    ) -> (f64, f64) {
        let (mut e0, mut e1) = (0.0, 0.0);
        for (t, el) in self.elements.iter().enumerate() {
            let c = self.curl(x, t);
            for (l, w) in element::QUADRATURE_7 {
                let p = el.from_barycentric(l);
                let u = exact(p);
                let uh = self.evaluate(x, t, l);
                e0 += w * el.area * ((u[0] - uh[0]).norm_sqr() + (u[1] - uh[1]).norm_sqr());
                e1 += w * el.area * (exact_curl(p) - c).norm_sqr();
            }
        }
        (e0.sqrt(), e1.sqrt())
    }

    pub(crate) fn check_len(&self, x: &[C64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "edge vector has {} entries, space has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// P1 hat-function space; one dof per vertex.
#[derive(Clone, Debug)]
pub struct NodalSpace {
    mesh: Arc<Mesh2D>,
}

impl NodalSpace {
    pub fn new(mesh: Arc<Mesh2D>) -> NodalSpace {
        NodalSpace { mesh }
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn interpolate(&self, f: impl Fn(Point) -> C64) -> Vec<C64> {
        self.mesh.vertices().iter().map(|&p| f(p)).collect()
    }

    /// Value at barycentric point `l` of triangle `t`.
    pub fn evaluate(&self, x: &[C64], t: usize, l: [f64; 3]) -> C64 {
        let tri = self.mesh.triangles()[t];
        (0..3).map(|k| x[tri[k]] * l[k]).sum()
    }

    /// Values at the midpoints of the edges of `tag`, in curve order.
    pub fn curve_values(&self, tag: &str, x: &[C64]) -> Result<Vec<C64>> {
        let curve = self.mesh.curve(tag)?;
        let edges = self.mesh.edges();
        Ok(curve
            .edges
            .iter()
            .map(|ce| {
                let [a, b] = edges[ce.edge];
                (x[a] + x[b]) * 0.5
            })
            .collect())
    }
}

/// Piecewise-constant complex coefficient κ, one value per triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    values: Vec<C64>,
}

impl CoefficientField {
    pub fn constant(mesh: &Mesh2D, kappa: C64) -> CoefficientField {
        CoefficientField {
            values: vec![kappa; mesh.num_triangles()],
        }
    }

    pub fn from_values(values: Vec<C64>) -> CoefficientField {
        CoefficientField { values }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Requires a positive real part and a positive imaginary part on
    /// every triangle.
    pub fn check_admissible(&self) -> Result<()> {
        for (t, k) in self.values.iter().enumerate() {
            if !(k.re > 0.0 && k.im > 0.0) {
                return Err(Error::InvalidCoefficient {
                    triangle: t,
                    re: k.re,
                    im: k.im,
                });
            }
        }
        Ok(())
    }
}
