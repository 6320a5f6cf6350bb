use std::sync::Arc;

use num_complex::Complex64;

use super::element::rot;
use super::{CoefficientField, EdgeSpace, NodalSpace, SparseComplexMatrix, TripletBuilder, C64, ZERO};
use crate::error::{Error, Result};

#[inline]
fn re(v: f64) -> C64 {
    Complex64::new(v, 0.0)
}

/// Grid for the curl-curl element weights `1/|T|`.
const CURL_WEIGHT_GRID: f64 = (1u64 << 24) as f64;

/// `S[i][j] = ∫ curl w_i curl w_j`. On a triangle `curl w_k = ±1/|T|`, so
/// the local matrix is `s_k s_m / |T|`. The weight is rounded to a fixed
/// binary grid: sums of grid values are exact, which makes `S·G` vanish
/// identically instead of up to roundoff of size `ε/|T|`.
pub fn assemble_curlcurl(space: &EdgeSpace) -> SparseComplexMatrix {
    let mesh = space.mesh();
    let mut b = TripletBuilder::new(space.dim(), space.dim());
    for (t, el) in space.elements().iter().enumerate() {
        let edges = mesh.triangle_edges(t);
        let signs = [0, 1, 2].map(|k| el.whitney_curl(k).signum());
        let w = (CURL_WEIGHT_GRID / el.area).round() / CURL_WEIGHT_GRID;
        for k in 0..3 {
            for m in 0..3 {
                b.add(edges[k], edges[m], re(signs[k] * signs[m] * w));
            }
        }
    }
    b.build()
}

/// `M[i][j] = ∫ κ w_i · w_j`; κ must be admissible.
pub fn assemble_mass(space: &EdgeSpace, kappa: &CoefficientField) -> Result<SparseComplexMatrix> {
    check_coefficient_len(space, kappa.values())?;
    kappa.check_admissible()?;
    assemble_weighted_mass(space, kappa.values())
}

/// Edge mass matrix with an arbitrary per-triangle weight (zero allowed).
/// Triangles with zero weight contribute nothing.
pub fn assemble_weighted_mass(space: &EdgeSpace, weights: &[C64]) -> Result<SparseComplexMatrix> {
    check_coefficient_len(space, weights)?;
    let mesh = space.mesh();
    let mut b = TripletBuilder::new(space.dim(), space.dim());
    for (t, el) in space.elements().iter().enumerate() {
        let w = weights[t];
        if w == ZERO {
            continue;
        }
        let edges = mesh.triangle_edges(t);
        for k in 0..3 {
            b.add(edges[k], edges[k], w * el.whitney_mass(k, k));
            for m in k + 1..3 {
                // one value for both entries keeps the matrix bitwise symmetric
                let v = w * el.whitney_mass(k, m);
                b.add(edges[k], edges[m], v);
                b.add(edges[m], edges[k], v);
            }
        }
    }
    Ok(b.build())
}

/// Computes `M_w x` triangle by triangle without forming the matrix; only
/// triangles with nonzero weight are visited.
pub fn apply_weighted_mass(space: &EdgeSpace, weights: &[C64], x: &[C64]) -> Result<Vec<C64>> {
    check_coefficient_len(space, weights)?;
    space.check_len(x)?;
    let mesh = space.mesh();
    let mut y = vec![ZERO; space.dim()];
    for (t, el) in space.elements().iter().enumerate() {
        let w = weights[t];
        if w == ZERO {
            continue;
        }
        let edges = mesh.triangle_edges(t);
        for k in 0..3 {
            let mut acc = ZERO;
            for m in 0..3 {
                acc += x[edges[m]] * el.whitney_mass(k, m);
            }
            y[edges[k]] += w * acc;
        }
    }
    Ok(y)
}

fn check_coefficient_len(space: &EdgeSpace, values: &[C64]) -> Result<()> {
    if values.len() != space.mesh().num_triangles() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient has {} values for {} triangles",
            values.len(),
            space.mesh().num_triangles()
        )));
    }
    Ok(())
}

/// `B[i][j] = ∫_tag (w_i·τ)(w_j·τ)`, diagonal with `1/|e|` per tagged edge.
pub fn assemble_boundary_mass(space: &EdgeSpace, tag: &str) -> Result<SparseComplexMatrix> {
    let curve = space.mesh().curve(tag)?;
    let mut b = TripletBuilder::new(space.dim(), space.dim());
    for ce in &curve.edges {
        b.add(ce.edge, ce.edge, re(1.0 / ce.length));
    }
    Ok(b.build())
}

/// `b[i] = ∫_tag g (w_i·τ)` with the midpoint rule on each edge.
pub fn assemble_boundary_load(
    space: &EdgeSpace,
    tag: &str,
    g: impl Fn([f64; 2]) -> C64,
) -> Result<Vec<C64>> {
    let curve = space.mesh().curve(tag)?;
    let samples: Vec<C64> = curve.edges.iter().map(|ce| g(ce.midpoint)).collect();
    boundary_load_from_samples(space, tag, &samples)
}

/// Same as [`assemble_boundary_load`] for data already sampled at the edge
/// midpoints of `tag`, in curve order.
pub fn boundary_load_from_samples(space: &EdgeSpace, tag: &str, samples: &[C64]) -> Result<Vec<C64>> {
    let curve = space.mesh().curve(tag)?;
    if samples.len() != curve.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for {} edges of `{tag}`",
            samples.len(),
            curve.len()
        )));
    }
    let mut b = vec![ZERO; space.dim()];
    for (ce, g) in curve.edges.iter().zip(samples) {
        // w·τ = orientation/|e| on the edge, times the edge length
        b[ce.edge] += g * ce.orientation;
    }
    Ok(b)
}

/// Node-to-edge incidence: `G[e][j] = 1`, `G[e][i] = -1` for `e = (i, j)`,
/// `i < j`. Maps a P1 function to the edge dofs of its gradient.
pub fn discrete_gradient(space: &EdgeSpace) -> SparseComplexMatrix {
    let mesh = space.mesh();
    let mut b = TripletBuilder::new(mesh.num_edges(), mesh.num_vertices());
    for (e, &[i, j]) in mesh.edges().iter().enumerate() {
        b.add(e, i, re(-1.0));
        b.add(e, j, re(1.0));
    }
    b.build()
}

fn check_same_mesh(nodal: &NodalSpace, edge: &EdgeSpace) -> Result<()> {
    if Arc::ptr_eq(nodal.mesh(), edge.mesh()) || nodal.mesh().checksum() == edge.mesh().checksum() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(
            "nodal and edge spaces live on different meshes".into(),
        ))
    }
}

/// `C[i][j] = ∫ curl φ_j · w_i` (edges × nodes), with the vector curl of a
/// scalar `curl φ = (∂₂φ, −∂₁φ)`.
pub fn assemble_mixed_curl(nodal: &NodalSpace, edge: &EdgeSpace) -> Result<SparseComplexMatrix> {
    check_same_mesh(nodal, edge)?;
    let mesh = edge.mesh();
    let mut b = TripletBuilder::new(edge.dim(), nodal.dim());
    for (t, el) in edge.elements().iter().enumerate() {
        let edges = mesh.triangle_edges(t);
        let verts = mesh.triangles()[t];
        for k in 0..3 {
            let wi = el.whitney_integral(k);
            for (n, &v) in verts.iter().enumerate() {
                let r = rot(el.grads[n]);
                b.add(edges[k], v, re(r[0] * wi[0] + r[1] * wi[1]));
            }
        }
    }
    Ok(b.build())
}

/// `D[i][j] = ∫ (curl w_i) φ_j` (edges × nodes).
pub fn assemble_curl_nodal(edge: &EdgeSpace, nodal: &NodalSpace) -> Result<SparseComplexMatrix> {
    check_same_mesh(nodal, edge)?;
    let mesh = edge.mesh();
    let mut b = TripletBuilder::new(edge.dim(), nodal.dim());
    for (t, el) in edge.elements().iter().enumerate() {
        let edges = mesh.triangle_edges(t);
        let verts = mesh.triangles()[t];
        for k in 0..3 {
            let v = el.whitney_curl(k) * el.area / 3.0;
            for &n in &verts {
                b.add(edges[k], n, re(v));
            }
        }
    }
    Ok(b.build())
}

/// `K[i][j] = ∫ ∇φ_i · ∇φ_j`.
pub fn assemble_nodal_stiffness(nodal: &NodalSpace) -> SparseComplexMatrix {
    nodal_assemble(nodal, |el, i, j| el.stiffness(i, j))
}

/// `M[i][j] = ∫ φ_i φ_j`.
pub fn assemble_nodal_mass(nodal: &NodalSpace) -> SparseComplexMatrix {
    nodal_assemble(nodal, |el, i, j| el.nodal_mass(i, j))
}

fn nodal_assemble(nodal: &NodalSpace, f: impl Fn(&super::Element, usize, usize) -> f64) -> SparseComplexMatrix {
    let mesh = nodal.mesh();
    let mut b = TripletBuilder::new(nodal.dim(), nodal.dim());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let el = super::Element::new(mesh.triangle_points(t), [(0, 1), (1, 2), (2, 0)]);
        for i in 0..3 {
            for j in 0..3 {
                b.add(tri[i], tri[j], re(f(&el, i, j)));
            }
        }
    }
    b.build()
}

/// `∫_tag φ_i φ_j`, exact for the linear traces on each edge.
pub fn assemble_nodal_boundary_mass(nodal: &NodalSpace, tag: &str) -> Result<SparseComplexMatrix> {
    let mesh = nodal.mesh();
    let curve = mesh.curve(tag)?;
    let mut b = TripletBuilder::new(nodal.dim(), nodal.dim());
    for ce in &curve.edges {
        let [p, q] = mesh.edges()[ce.edge];
        let d = ce.length / 3.0;
        let o = ce.length / 6.0;
        b.add(p, p, re(d));
        b.add(q, q, re(d));
        b.add(p, q, re(o));
        b.add(q, p, re(o));
    }
    Ok(b.build())
}

/// `r[m] = ∫_tag g φ_m` with `g` given at edge midpoints (midpoint rule).
pub fn nodal_boundary_load(nodal: &NodalSpace, tag: &str, samples: &[C64]) -> Result<Vec<C64>> {
    let mesh = nodal.mesh();
    let curve = mesh.curve(tag)?;
    if samples.len() != curve.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for {} edges of `{tag}`",
            samples.len(),
            curve.len()
        )));
    }
    let mut r = vec![ZERO; nodal.dim()];
    for (ce, g) in curve.edges.iter().zip(samples) {
        let [p, q] = mesh.edges()[ce.edge];
        let half = g * (0.5 * ce.length);
        r[p] += half;
        r[q] += half;
    }
    Ok(r)
}
