//! Polar-structured triangulations of disks and annuli.
//!
//! Nodes are laid out on concentric rings. Every requested radius becomes a
//! ring, so embedded circles are realized exactly by mesh edges and can be
//! tagged as curves. Consecutive rings are stitched by a zipper
//! triangulation and the disk center is closed with a fan.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Local edges of a triangle as pairs of local vertex indices.
pub const LOCAL_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

const MIN_RING_NODES: usize = 6;

/// One mesh edge seen as a piece of a tagged curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveEdge {
    pub edge: usize,
    pub midpoint: Point,
    /// Unit normal pointing away from the origin.
    pub normal: Point,
    pub length: f64,
    /// +1 when the global edge direction (low to high vertex index) runs
    /// counterclockwise along the curve, -1 otherwise.
    pub orientation: f64,
}

impl CurveEdge {
    /// Counterclockwise unit tangent.
    pub fn tangent(&self) -> Point {
        [-self.normal[1], self.normal[0]]
    }

    pub fn angle(&self) -> f64 {
        self.midpoint[1].atan2(self.midpoint[0])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    /// Edges ordered counterclockwise.
    pub edges: Vec<CurveEdge>,
    /// Whether the edges form one closed polyline.
    pub closed: bool,
    pub radius: f64,
}

impl Curve {
    pub fn measure(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.length).collect()
    }

    pub fn midpoints(&self) -> Vec<Point> {
        self.edges.iter().map(|e| e.midpoint).collect()
    }
}

/// Boundary patches, equally spaced in angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub count: usize,
    pub half_width: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Default for PatchSpec {
    fn default() -> Self {
        PatchSpec {
            count: 32,
            half_width: 0.075,
            phase: 0.0,
        }
    }
}

impl PatchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidGeometry("patch count must be positive".into()));
        }
        if !(self.half_width > 0.0) || self.count as f64 * 2.0 * self.half_width >= 2.0 * PI {
            return Err(Error::InvalidGeometry(format!(
                "{} patches of half-width {} overlap",
                self.count, self.half_width
            )));
        }
        Ok(())
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.count)
            .map(|j| self.phase + 2.0 * PI * j as f64 / self.count as f64)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Mesh2D {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    tri_signs: Vec<[i8; 3]>,
    edge_tri_count: Vec<u8>,
    curves: BTreeMap<String, Curve>,
    outer_radius: f64,
}

/// Tag name used for an embedded circle of radius `r`.
pub fn radius_tag(r: f64) -> String {
    format!("r={r}")
}

struct Ring {
    radius: f64,
    start: usize,
    count: usize,
    phase: f64,
}

impl Ring {
    fn node(&self, k: usize) -> usize {
        self.start + k % self.count
    }
}

fn ring_radii(r_start: f64, r_end: f64, h: f64, embedded: &[f64]) -> Vec<f64> {
    let mut keys: Vec<f64> = embedded.to_vec();
    keys.push(r_end);
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    let mut radii = Vec::new();
    let mut prev = r_start;
    for &key in &keys {
        let n = (((key - prev) / h) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..n {
            radii.push(prev + (key - prev) * k as f64 / n as f64);
        }
        radii.push(key);
        prev = key;
    }
    radii
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn wrap_angle(mut t: f64) -> f64 {
    while t <= -PI {
        t += 2.0 * PI;
    }
    while t > PI {
        t -= 2.0 * PI;
    }
    t
}

struct Builder {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    rings: Vec<Ring>,
}

impl Builder {
    fn add_ring(&mut self, radius: f64, h: f64) {
        let count = ((2.0 * PI * radius / h - 1e-9).ceil() as usize).max(MIN_RING_NODES);
        let phase = if self.rings.len() % 2 == 1 {
            PI / count as f64
        } else {
            0.0
        };
        let start = self.vertices.len();
        for k in 0..count {
            let t = phase + 2.0 * PI * k as f64 / count as f64;
            self.vertices.push([radius * t.cos(), radius * t.sin()]);
        }
        self.rings.push(Ring {
            radius,
            start,
            count,
            phase,
        });
    }

    fn push_triangle(&mut self, mut tri: [usize; 3]) {
        let [a, b, c] = tri.map(|i| self.vertices[i]);
        if signed_area(a, b, c) < 0.0 {
            tri.swap(1, 2);
        }
        self.triangles.push(tri);
    }

    fn fan(&mut self, center: usize, ring: usize) {
        let (start, count) = (self.rings[ring].start, self.rings[ring].count);
        for k in 0..count {
            self.push_triangle([center, start + k, start + (k + 1) % count]);
        }
    }

    /// Zipper triangulation of the strip between two consecutive rings.
    fn stitch(&mut self, inner: usize, outer: usize) {
        let (ni, pi, si) = {
            let r = &self.rings[inner];
            (r.count, r.phase, r.start)
        };
        let (no, po, so) = {
            let r = &self.rings[outer];
            (r.count, r.phase, r.start)
        };
        let di = 2.0 * PI / ni as f64;
        let dn = 2.0 * PI / no as f64;
        let a0 = pi;
        // outer node closest in angle to the first inner node
        let (offset, b0) = (0..no)
            .map(|j| (j, a0 + wrap_angle(po + dn * j as f64 - a0)))
            .min_by(|x, y| (x.1 - a0).abs().total_cmp(&(y.1 - a0).abs()))
            .expect("ring has nodes");
        let inner_node = |i: usize| si + i % ni;
        let outer_node = |j: usize| so + (j + offset) % no;
        let (mut i, mut j) = (0usize, 0usize);
        let dist = |b: &Builder, p: usize, q: usize| {
            let (x, y) = (b.vertices[p], b.vertices[q]);
            (x[0] - y[0]).hypot(x[1] - y[1])
        };
        // advance along whichever ring gives the shorter new diagonal
        while i < ni || j < no {
            let advance_inner = if j == no {
                true
            } else if i == ni {
                false
            } else {
                let via_inner = dist(self, inner_node(i + 1), outer_node(j));
                let via_outer = dist(self, inner_node(i), outer_node(j + 1));
                via_inner < via_outer || (via_inner == via_outer && di * (i + 1) as f64 <= dn * (j + 1) as f64 + b0 - a0)
            };
            if advance_inner {
                self.push_triangle([inner_node(i), inner_node(i + 1), outer_node(j)]);
                i += 1;
            } else {
                self.push_triangle([inner_node(i), outer_node(j + 1), outer_node(j)]);
                j += 1;
            }
        }
    }
}

impl Mesh2D {
    /// Triangulates the disk of the given radius centered at the origin.
    pub fn disk(radius: f64, h: f64, embedded_radii: &[f64]) -> Result<Mesh2D> {
        if !(radius > 0.0) || !(h > 0.0) || h >= radius {
            return Err(Error::InvalidGeometry(format!(
                "disk needs 0 < h < radius, got h = {h}, radius = {radius}"
            )));
        }
        for &r in embedded_radii {
            if !(r > 0.0 && r < radius) {
                return Err(Error::InvalidGeometry(format!(
                    "embedded radius {r} outside (0, {radius})"
                )));
            }
        }
        let radii = ring_radii(0.0, radius, h, embedded_radii);
        let mut b = Builder {
            vertices: vec![[0.0, 0.0]],
            triangles: Vec::new(),
            rings: Vec::new(),
        };
        for &r in &radii {
            b.add_ring(r, h);
        }
        b.fan(0, 0);
        for k in 1..b.rings.len() {
            b.stitch(k - 1, k);
        }
        let last = b.rings.len() - 1;
        let mut tags = vec![(last, "Gamma".to_string(), true)];
        Self::finish(b, embedded_radii, &mut tags, radius)
    }

    /// Triangulates the annulus `r_in < |x| < r_out`.
    pub fn annulus(r_in: f64, r_out: f64, h: f64, embedded_radii: &[f64]) -> Result<Mesh2D> {
        if !(r_in > 0.0) || !(r_out > r_in) || !(h > 0.0) || h >= r_out {
            return Err(Error::InvalidGeometry(format!(
                "annulus needs 0 < r_in < r_out and 0 < h < r_out, got ({r_in}, {r_out}, {h})"
            )));
        }
        for &r in embedded_radii {
            if !(r > r_in && r < r_out) {
                return Err(Error::InvalidGeometry(format!(
                    "embedded radius {r} outside ({r_in}, {r_out})"
                )));
            }
        }
        let radii = ring_radii(r_in, r_out, h, embedded_radii);
        let mut b = Builder {
            vertices: Vec::new(),
            triangles: Vec::new(),
            rings: Vec::new(),
        };
        b.add_ring(r_in, h);
        for &r in &radii {
            b.add_ring(r, h);
        }
        for k in 1..b.rings.len() {
            b.stitch(k - 1, k);
        }
        let last = b.rings.len() - 1;
        let mut tags = vec![
            (last, "Gamma_outer".to_string(), true),
            (0, "Gamma_inner".to_string(), true),
        ];
        Self::finish(b, embedded_radii, &mut tags, r_out)
    }

    fn finish(
        b: Builder,
        embedded: &[f64],
        tags: &mut Vec<(usize, String, bool)>,
        outer_radius: f64,
    ) -> Result<Mesh2D> {
        for &r in embedded {
            let idx = b
                .rings
                .iter()
                .position(|ring| ring.radius == r)
                .expect("embedded radius is a ring");
            tags.push((idx, radius_tag(r), true));
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_tri_count = Vec::new();
        let mut tri_edges = Vec::with_capacity(b.triangles.len());
        let mut tri_signs = Vec::with_capacity(b.triangles.len());
        for tri in &b.triangles {
            let mut te = [0usize; 3];
            let mut ts = [0i8; 3];
            for (k, &(la, lb)) in LOCAL_EDGES.iter().enumerate() {
                let (va, vb) = (tri[la], tri[lb]);
                let key = (va.min(vb), va.max(vb));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_tri_count.push(0u8);
                    edges.len() - 1
                });
                edge_tri_count[e] += 1;
                te[k] = e;
                ts[k] = if va < vb { 1 } else { -1 };
            }
            tri_edges.push(te);
            tri_signs.push(ts);
        }

        let mut curves = BTreeMap::new();
        for (ring_idx, name, closed) in tags.iter() {
            let ring = &b.rings[*ring_idx];
            let mut curve_edges = Vec::with_capacity(ring.count);
            for k in 0..ring.count {
                let (p, q) = (ring.node(k), ring.node(k + 1));
                let key = (p.min(q), p.max(q));
                let e = *edge_index.get(&key).ok_or_else(|| {
                    Error::InvalidGeometry(format!("ring edge ({p}, {q}) missing"))
                })?;
                let (pp, qq) = (b.vertices[p], b.vertices[q]);
                let d = [qq[0] - pp[0], qq[1] - pp[1]];
                let length = d[0].hypot(d[1]);
                curve_edges.push(CurveEdge {
                    edge: e,
                    midpoint: [0.5 * (pp[0] + qq[0]), 0.5 * (pp[1] + qq[1])],
                    normal: [d[1] / length, -d[0] / length],
                    length,
                    orientation: if p < q { 1.0 } else { -1.0 },
                });
            }
            curves.insert(
                name.clone(),
                Curve {
                    edges: curve_edges,
                    closed: *closed,
                    radius: ring.radius,
                },
            );
        }

        Ok(Mesh2D {
            vertices: b.vertices,
            triangles: b.triangles,
            edges,
            tri_edges,
            tri_signs,
            edge_tri_count,
            curves,
            outer_radius,
        })
    }

    /// Splits the full-circle curve `boundary_tag` into `Gamma0` (edges whose
    /// midpoint angle falls inside a patch) and `Gamma1` (the rest).
    pub fn tag_patches(mut self, boundary_tag: &str, spec: &PatchSpec) -> Result<Mesh2D> {
        spec.validate()?;
        let curve = self.curve(boundary_tag)?;
        if !curve.closed {
            return Err(Error::InvalidGeometry(format!(
                "patch tagging needs a closed curve, `{boundary_tag}` is not"
            )));
        }
        let centers = spec.centers();
        let (inside, outside): (Vec<CurveEdge>, Vec<CurveEdge>) =
            curve.edges.iter().cloned().partition(|e| {
                let t = e.angle();
                centers
                    .iter()
                    .any(|&c| wrap_angle(t - c).abs() <= spec.half_width)
            });
        let radius = curve.radius;
        self.curves.insert(
            "Gamma0".into(),
            Curve {
                edges: inside,
                closed: false,
                radius,
            },
        );
        self.curves.insert(
            "Gamma1".into(),
            Curve {
                edges: outside,
                closed: false,
                radius,
            },
        );
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Global edge indices of the local edges (0,1), (1,2), (2,0).
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// +1 when the local edge runs from the lower to the higher global
    /// vertex index, -1 otherwise.
    pub fn triangle_signs(&self, t: usize) -> [i8; 3] {
        self.tri_signs[t]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let p = self.triangle_points(t);
        LOCAL_EDGES
            .iter()
            .map(|&(a, b)| (p[a][0] - p[b][0]).hypot(p[a][1] - p[b][1]))
            .fold(0.0, f64::max)
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.diameter(t))
            .fold(0.0, f64::max)
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    /// Number of triangles sharing edge `e` (1 on the boundary, 2 inside).
    pub fn edge_triangle_count(&self, e: usize) -> usize {
        self.edge_tri_count[e] as usize
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_tri_count[e] == 1
    }

    pub fn curve(&self, tag: &str) -> Result<&Curve> {
        self.curves
            .get(tag)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    pub fn curve_tags(&self) -> impl Iterator<Item = &str> {
        self.curves.keys().map(String::as_str)
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    /// Checks the structural invariants, returning the first violation.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.num_triangles() {
            if !(self.signed_area(t) > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "triangle {t} has non-positive area"
                )));
            }
        }
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if a >= b {
                return Err(Error::InvalidGeometry(format!("edge {e} not oriented low to high")));
            }
            if !(1..=2).contains(&self.edge_tri_count[e]) {
                return Err(Error::InvalidGeometry(format!(
                    "edge {e} shared by {} triangles",
                    self.edge_tri_count[e]
                )));
            }
        }
        for (name, curve) in &self.curves {
            if curve.closed {
                let first = curve.edges.first().map(|e| self.edges[e.edge]);
                let mut endpoints: HashMap<usize, usize> = HashMap::new();
                for ce in &curve.edges {
                    for v in self.edges[ce.edge] {
                        *endpoints.entry(v).or_default() += 1;
                    }
                }
                if first.is_none() || endpoints.values().any(|&c| c != 2) {
                    return Err(Error::InvalidGeometry(format!("curve `{name}` is not closed")));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over vertex coordinates and connectivity, as lowercase hex.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for p in &self.vertices {
            hasher.update(p[0].to_le_bytes());
            hasher.update(p[1].to_le_bytes());
        }
        for t in &self.triangles {
            for v in t {
                hasher.update((*v as u64).to_le_bytes());
            }
        }
        to_hex(&hasher.finalize())
    }

    /// Plain-text dump with VERTICES / TRIANGLES / EDGES / TAGS sections.
    pub fn export_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "VERTICES {}", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{:e} {:e}", p[0], p[1]);
        }
        let _ = writeln!(s, "TRIANGLES {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "EDGES {}", self.edges.len());
        for e in &self.edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        let _ = writeln!(s, "TAGS {}", self.curves.len());
        for (name, c) in &self.curves {
            let ids: Vec<String> = c.edges.iter().map(|e| e.edge.to_string()).collect();
            let _ = writeln!(s, "{} {} {}", name, c.edges.len(), ids.join(" "));
        }
        s
    }
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
