//! Direct problem `curl curl E − k²κE = 0` with Neumann data
//! `curl E = g` on the boundary, tangential traces and synthetic data.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_curlcurl, assemble_mass, boundary_load_from_samples, CoefficientField, EdgeSpace,
    Factorization, C64,
};
use crate::mesh::{radius_tag, Curve, Mesh2D, PatchSpec, Point};
use crate::support::{perturbed_kappa, Sampling, Support};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumConfig {
    pub omega: f64,
    pub eps0: f64,
    pub mu0: f64,
    pub eps_background: f64,
    pub sigma_background: f64,
}

impl Default for MediumConfig {
    /// Unit physical constants, giving `k = 1` and `κ₀ = 1 + i`.
    fn default() -> Self {
        MediumConfig {
            omega: 1.0,
            eps0: 1.0,
            mu0: 1.0,
            eps_background: 1.0,
            sigma_background: 1.0,
        }
    }
}

impl MediumConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega", self.omega),
            ("eps0", self.eps0),
            ("mu0", self.mu0),
            ("eps_background", self.eps_background),
            ("sigma_background", self.sigma_background),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("medium.{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    /// `k = ω√(μ₀ε₀)`.
    pub fn wavenumber(&self) -> f64 {
        self.omega * (self.mu0 * self.eps0).sqrt()
    }

    pub fn kappa0(&self) -> C64 {
        background_kappa(self)
    }

    /// `k√κ₀` with the principal square root.
    pub fn propagation(&self) -> C64 {
        self.kappa0().sqrt() * self.wavenumber()
    }
}

/// `κ₀ = (ε + iσ/ω)/ε₀`.
pub fn background_kappa(m: &MediumConfig) -> C64 {
    Complex64::new(m.eps_background, m.sigma_background / m.omega) / m.eps0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentWave {
    pub direction: [f64; 2],
}

impl IncidentWave {
    pub fn new(direction: [f64; 2]) -> Result<IncidentWave> {
        let n = direction[0].hypot(direction[1]);
        if !((n - 1.0).abs() < 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "wave direction ({}, {}) is not a unit vector",
                direction[0], direction[1]
            )));
        }
        Ok(IncidentWave { direction })
    }

    pub fn from_angle(theta: f64) -> IncidentWave {
        IncidentWave {
            direction: [theta.cos(), theta.sin()],
        }
    }

    /// Directions `θ_m = 2πm/M`, `m = 0…M−1`.
    pub fn equally_spaced(count: usize) -> Vec<IncidentWave> {
        (0..count)
            .map(|m| IncidentWave::from_angle(2.0 * PI * m as f64 / count as f64))
            .collect()
    }

    /// `η⊥ = (−η₂, η₁)`.
    pub fn polarization(&self) -> [f64; 2] {
        [-self.direction[1], self.direction[0]]
    }

    fn phase(&self, m: &MediumConfig, x: Point) -> C64 {
        let ik = Complex64::i() * m.propagation();
        (ik * (self.direction[0] * x[0] + self.direction[1] * x[1])).exp()
    }

    /// `E_η(x) = η⊥ e^{ik√κ₀ η·x}`.
    pub fn field(&self, m: &MediumConfig, x: Point) -> [C64; 2] {
        let e = self.phase(m, x);
        let p = self.polarization();
        [e * p[0], e * p[1]]
    }

    /// `curl E_η(x) = ik√κ₀ e^{ik√κ₀ η·x}`.
    pub fn curl(&self, m: &MediumConfig, x: Point) -> C64 {
        Complex64::i() * m.propagation() * self.phase(m, x)
    }
}

/// Neumann data `curl E_η` at the edge midpoints of `curve`.
pub fn plane_wave_neumann(w: &IncidentWave, m: &MediumConfig, curve: &Curve) -> Vec<C64> {
    curve.edges.iter().map(|ce| w.curl(m, ce.midpoint)).collect()
}

/// Factorized `S − k²M(κ)` on a mesh, with Neumann data applied on one or
/// more boundary curves.
pub struct DirectSolver {
    space: EdgeSpace,
    factor: Factorization,
    /// Boundary curves and their sense relative to counterclockwise
    /// traversal (−1 for the inner circle of an annulus).
    boundaries: Vec<(String, f64)>,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver")
            .field("dim", &self.space.dim())
            .field("boundaries", &self.boundaries)
            .finish()
    }
}

impl DirectSolver {
    pub fn new(space: EdgeSpace, kappa: &CoefficientField, medium: &MediumConfig) -> Result<DirectSolver> {
        let k = medium.wavenumber();
        let s = assemble_curlcurl(&space);
        let m = assemble_mass(&space, kappa)?;
        let a = s.combine(Complex64::new(1.0, 0.0), &m, Complex64::new(-k * k, 0.0))?;
        let factor = Factorization::new(&a)?;
        let mut boundaries = Vec::new();
        for tag in ["Gamma", "Gamma_outer"] {
            if space.mesh().curve(tag).is_ok() {
                boundaries.push((tag.to_string(), 1.0));
            }
        }
        if space.mesh().curve("Gamma_inner").is_ok() {
            boundaries.push(("Gamma_inner".to_string(), -1.0));
        }
        Ok(DirectSolver {
            space,
            factor,
            boundaries,
        })
    }

    pub fn space(&self) -> &EdgeSpace {
        &self.space
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    /// Load vector for Neumann data given per boundary curve (in the order
    /// of `boundary_tags`), sampled at edge midpoints.
    pub fn load(&self, data: &[Vec<C64>]) -> Result<Vec<C64>> {
        if data.len() != self.boundaries.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} boundary data blocks for {} boundary curves",
                data.len(),
                self.boundaries.len()
            )));
        }
        let mut b = vec![Complex64::new(0.0, 0.0); self.space.dim()];
        for ((tag, sense), g) in self.boundaries.iter().zip(data) {
            let part = boundary_load_from_samples(&self.space, tag, g)?;
            for (x, y) in b.iter_mut().zip(part) {
                *x += y * *sense;
            }
        }
        Ok(b)
    }

    pub fn boundary_tags(&self) -> impl Iterator<Item = &str> {
        self.boundaries.iter().map(|(t, _)| t.as_str())
    }

    /// Neumann data of a plane wave on every boundary curve.
    pub fn plane_wave_data(&self, w: &IncidentWave, m: &MediumConfig) -> Result<Vec<Vec<C64>>> {
        self.boundaries
            .iter()
            .map(|(tag, _)| Ok(plane_wave_neumann(w, m, self.space.mesh().curve(tag)?)))
            .collect()
    }

    pub fn solve(&self, data: &[Vec<C64>]) -> Result<Vec<C64>> {
        Ok(self.factor.solve(&self.load(data)?))
    }

    /// Solves for every incident wave in parallel.
    pub fn solve_waves(&self, waves: &[IncidentWave], m: &MediumConfig) -> Result<Vec<Vec<C64>>> {
        let loads = waves
            .iter()
            .map(|w| self.load(&self.plane_wave_data(w, m)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.factor.solve_many(&loads))
    }
}

/// One-off solve of the direct problem with Neumann data on the outer
/// boundary `Gamma` of a disk mesh.
pub fn solve_direct(
    space: &EdgeSpace,
    kappa: &CoefficientField,
    g_n: &[C64],
    medium: &MediumConfig,
) -> Result<Vec<C64>> {
    DirectSolver::new(space.clone(), kappa, medium)?.solve(&[g_n.to_vec()])
}

/// Relative H(curl) error of a discrete field against the plane wave.
pub fn plane_wave_hcurl_error(space: &EdgeSpace, x: &[C64], w: &IncidentWave, m: &MediumConfig) -> f64 {
    let (e0, e1) = space.hcurl_errors(x, |p| w.field(m, p), |p| w.curl(m, p));
    let zero = vec![Complex64::new(0.0, 0.0); x.len()];
    let (n0, n1) = space.hcurl_errors(&zero, |p| w.field(m, p), |p| w.curl(m, p));
    (e0 * e0 + e1 * e1).sqrt() / (n0 * n0 + n1 * n1).sqrt()
}

/// Tangential-trace samples on a curve for a list of incident waves.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceData {
    pub tag: String,
    pub midpoints: Vec<Point>,
    pub lengths: Vec<f64>,
    /// One vector per wave, one value per curve edge.
    pub waves: Vec<Vec<C64>>,
}

impl TraceData {
    pub fn empty(tag: &str, curve: &Curve) -> TraceData {
        TraceData {
            tag: tag.to_string(),
            midpoints: curve.midpoints(),
            lengths: curve.lengths(),
            waves: Vec::new(),
        }
    }

    /// Traces of the given fields on curve `tag`.
    pub fn from_fields(space: &EdgeSpace, tag: &str, fields: &[Vec<C64>]) -> Result<TraceData> {
        let mut t = TraceData::empty(tag, space.mesh().curve(tag)?);
        for f in fields {
            t.waves.push(space.tangential_trace(tag, f)?);
        }
        Ok(t)
    }

    pub fn num_waves(&self) -> usize {
        self.waves.len()
    }

    pub fn num_points(&self) -> usize {
        self.midpoints.len()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.midpoints.iter().map(|p| p[1].atan2(p[0])).collect()
    }

    /// `Σ |v|²·|e|` for one wave.
    pub fn norm_sq(&self, wave: usize) -> f64 {
        weighted_norm_sq(&self.waves[wave], &self.lengths)
    }

    /// `Σ_m ‖v_m‖²`.
    pub fn energy(&self) -> f64 {
        (0..self.num_waves()).map(|m| self.norm_sq(m)).sum()
    }

    pub fn check_compatible(&self, other: &TraceData) -> Result<()> {
        if self.num_points() != other.num_points() || self.num_waves() != other.num_waves() {
            return Err(Error::DimensionMismatch(format!(
                "traces on `{}` ({} waves x {} points) vs `{}` ({} x {})",
                self.tag,
                self.num_waves(),
                self.num_points(),
                other.tag,
                other.num_waves(),
                other.num_points()
            )));
        }
        Ok(())
    }

    /// `self − other`, pointwise.
    pub fn difference(&self, other: &TraceData) -> Result<TraceData> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.waves.iter_mut().zip(&other.waves) {
            for (x, y) in a.iter_mut().zip(b) {
                *x -= y;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, s: C64) -> TraceData {
        let mut out = self.clone();
        out.waves.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    /// Maps the samples onto another curve by polar angle: linear
    /// interpolation between neighboring samples, nearest sample across
    /// gaps in the source (between boundary patches).
    pub fn resample(&self, tag: &str, target: &Curve) -> TraceData {
        let src = self.angles();
        let mut order: Vec<usize> = (0..src.len()).collect();
        order.sort_by(|&a, &b| src[a].total_cmp(&src[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| src[i]).collect();
        let n = sorted.len();
        let mut spacings: Vec<f64> = (0..n)
            .map(|k| {
                let next = if k + 1 < n { sorted[k + 1] } else { sorted[0] + 2.0 * PI };
                next - sorted[k]
            })
            .collect();
        spacings.sort_by(f64::total_cmp);
        let typical = if n > 0 { spacings[n / 2] } else { 0.0 };

        // for every target point: (low index, high index, weight of high)
        let stencil: Vec<(usize, usize, f64)> = target
            .edges
            .iter()
            .map(|ce| {
                let t = ce.angle();
                let pos = sorted.partition_point(|&a| a <= t);
                let (lo, hi) = ((pos + n - 1) % n, pos % n);
                let mut a_lo = sorted[lo];
                let mut a_hi = sorted[hi];
                if pos == 0 {
                    a_lo -= 2.0 * PI;
                }
                if pos == n {
                    a_hi += 2.0 * PI;
                }
                let gap = a_hi - a_lo;
                if gap <= 1.5 * typical && gap > 0.0 {
                    (order[lo], order[hi], (t - a_lo) / gap)
                } else if t - a_lo <= a_hi - t {
                    (order[lo], order[lo], 0.0)
                } else {
                    (order[hi], order[hi], 0.0)
                }
            })
            .collect();
        let waves = self
            .waves
            .iter()
            .map(|w| {
                stencil
                    .iter()
                    .map(|&(lo, hi, s)| w[lo] * (1.0 - s) + w[hi] * s)
                    .collect()
            })
            .collect();
        TraceData {
            tag: tag.to_string(),
            midpoints: target.midpoints(),
            lengths: target.lengths(),
            waves,
        }
    }
}

pub fn weighted_norm_sq(v: &[C64], lengths: &[f64]) -> f64 {
    v.iter().zip(lengths).map(|(x, l)| x.norm_sqr() * l).sum()
}

/// Adds uniform complex noise drawn in the unit disk, scaled per wave so
/// that the relative weighted L² error is exactly `eta`.
pub fn add_noise(t: &TraceData, eta: f64, seed: u64) -> Result<TraceData> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level {eta} must be non-negative")));
    }
    if eta == 0.0 {
        return Ok(t.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = t.clone();
    for w in out.waves.iter_mut() {
        let noise: Vec<C64> = (0..w.len())
            .map(|_| {
                let r = rng.random::<f64>().sqrt();
                let a = 2.0 * PI * rng.random::<f64>();
                Complex64::from_polar(r, a)
            })
            .collect();
        let signal = weighted_norm_sq(w, &t.lengths).sqrt();
        let size = weighted_norm_sq(&noise, &t.lengths).sqrt();
        if size == 0.0 || signal == 0.0 {
            continue;
        }
        let s = eta * signal / size;
        for (x, n) in w.iter_mut().zip(noise) {
            *x += n * s;
        }
    }
    Ok(out)
}

/// Geometry shared by every stage: the domain disk, the known ring
/// `r_known < |x| < radius` and the interior curve at `r_int`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub radius: f64,
    pub r_known: f64,
    pub r_int: f64,
    #[serde(default)]
    pub patches: PatchSpec,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            radius: 1.0,
            r_known: 0.7,
            r_int: 0.8,
            patches: PatchSpec::default(),
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.r_known && self.r_known < self.r_int && self.r_int < self.radius) {
            return Err(Error::InvalidGeometry(format!(
                "need 0 < r_known ({}) < r_int ({}) < radius ({})",
                self.r_known, self.r_int, self.radius
            )));
        }
        self.patches.validate()
    }

    pub fn interior_tag(&self) -> String {
        radius_tag(self.r_int)
    }

    /// Disk mesh with the known ring and the interior curve embedded and
    /// the accessible patches tagged.
    pub fn disk_mesh(&self, h: f64) -> Result<Mesh2D> {
        Mesh2D::disk(self.radius, h, &[self.r_known, self.r_int])?.tag_patches("Gamma", &self.patches)
    }

    /// Mesh of the known ring alone.
    pub fn ring_mesh(&self, h: f64) -> Result<Mesh2D> {
        Mesh2D::annulus(self.r_known, self.radius, h, &[self.r_int])?
            .tag_patches("Gamma_outer", &self.patches)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisInput {
    pub geometry: Geometry,
    pub medium: MediumConfig,
    pub h: f64,
    pub support: Support,
    pub amplitude: f64,
    pub waves: Vec<IncidentWave>,
    pub sampling: Sampling,
}

/// Synthetic measurements and diagnostics from one data mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub mesh_checksum: String,
    pub h: f64,
    pub waves: Vec<IncidentWave>,
    /// `E[κ_ex]×n` on Γ₀.
    pub gamma0_total: TraceData,
    /// `E[κ₀]×n` on Γ₀.
    pub gamma0_background: TraceData,
    /// Exact difference trace on the interior curve.
    pub interior_delta: TraceData,
}

impl Dataset {
    /// Difference data `δg_D` on Γ₀.
    pub fn gamma0_delta(&self) -> Result<TraceData> {
        self.gamma0_total.difference(&self.gamma0_background)
    }
}

/// Solves with the true and the background coefficient for every wave.
/// Both solves share the same Neumann load vector.
pub fn synthesize_dataset(input: &SynthesisInput) -> Result<Dataset> {
    input.geometry.validate()?;
    input.medium.validate()?;
    input.support.validate()?;
    let mesh = Arc::new(input.geometry.disk_mesh(input.h)?);
    let space = EdgeSpace::new(mesh.clone());
    let kappa0 = input.medium.kappa0();
    let k_ex = perturbed_kappa(&mesh, kappa0, &input.support, input.amplitude, input.sampling);
    let k_bg = CoefficientField::constant(&mesh, kappa0);

    let solver_bg = DirectSolver::new(space.clone(), &k_bg, &input.medium)?;
    let loads = input
        .waves
        .iter()
        .map(|w| solver_bg.load(&solver_bg.plane_wave_data(w, &input.medium)?))
        .collect::<Result<Vec<_>>>()?;
    let bg = solver_bg.factorization().solve_many(&loads);
    drop(solver_bg);
    let solver_ex = DirectSolver::new(space.clone(), &k_ex, &input.medium)?;
    let ex = solver_ex.factorization().solve_many(&loads);

    let int_tag = input.geometry.interior_tag();
    let interior_total = TraceData::from_fields(&space, &int_tag, &ex)?;
    let interior_bg = TraceData::from_fields(&space, &int_tag, &bg)?;
    Ok(Dataset {
        mesh_checksum: mesh.checksum(),
        h: input.h,
        waves: input.waves.clone(),
        gamma0_total: TraceData::from_fields(&space, "Gamma0", &ex)?,
        gamma0_background: TraceData::from_fields(&space, "Gamma0", &bg)?,
        interior_delta: interior_total.difference(&interior_bg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unit_medium_kappa() {
        let m = MediumConfig::default();
        assert_eq!(background_kappa(&m), c(1.0, 1.0));
        assert_eq!(m.wavenumber(), 1.0);
    }

    #[test]
    fn microwave_kappa() {
        let m = MediumConfig {
            omega: 1e8,
            eps0: 8.854e-12,
            mu0: 1.0,
            eps_background: 1e-10,
            sigma_background: 0.33,
        };
        let k = background_kappa(&m);
        assert!((k.re - 11.294).abs() < 1e-3, "{k}");
        assert!((k.im - 372.71).abs() < 1e-2, "{k}");
    }

    #[test]
    fn zero_conductivity_gives_real_kappa() {
        let m = MediumConfig {
            sigma_background: 0.0,
            ..MediumConfig::default()
        };
        assert_eq!(background_kappa(&m).im, 0.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn plane_wave_curl_at_origin() {
        let m = MediumConfig::default();
        for w in [IncidentWave::from_angle(0.0), IncidentWave::from_angle(PI / 2.0)] {
            let g = w.curl(&m, [0.0, 0.0]);
            assert!((g - c(-0.455_089_860_562_227_3, 1.098_684_113_467_809_9)).norm() < 1e-12, "{g}");
        }
    }

    #[test]
    fn plane_wave_modulus_decays_along_direction() {
        let m = MediumConfig::default();
        let w = IncidentWave::from_angle(0.3);
        let s = m.kappa0().sqrt();
        for x in [[0.2, -0.1], [-0.5, 0.7]] {
            let eta_x = w.direction[0] * x[0] + w.direction[1] * x[1];
            let expected = s.norm() * (-s.im * eta_x).exp();
            assert!((w.curl(&m, x).norm() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_solves_the_equation() {
        // curl(curl E) = k²κ₀E checked by central differences
        let m = MediumConfig::default();
        let w = IncidentWave::from_angle(1.1);
        let x = [0.3, -0.2];
        let h = 1e-5;
        let d1 = (w.curl(&m, [x[0] + h, x[1]]) - w.curl(&m, [x[0] - h, x[1]])) / (2.0 * h);
        let d2 = (w.curl(&m, [x[0], x[1] + h]) - w.curl(&m, [x[0], x[1] - h])) / (2.0 * h);
        let e = w.field(&m, x);
        let k2 = m.kappa0() * m.wavenumber().powi(2);
        assert!((d2 - k2 * e[0]).norm() < 1e-8);
        assert!((-d1 - k2 * e[1]).norm() < 1e-8);
    }

    #[test]
    fn direction_must_be_unit() {
        assert!(IncidentWave::new([1.0, 1.0]).is_err());
        let w = IncidentWave::new([0.6, 0.8]).unwrap();
        let p = w.polarization();
        assert_eq!(p[0] * w.direction[0] + p[1] * w.direction[1], 0.0);
    }

    fn space(h: f64) -> EdgeSpace {
        EdgeSpace::new(Arc::new(Mesh2D::disk(1.0, h, &[0.8]).unwrap()))
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let s = space(0.2);
        let m = MediumConfig::default();
        let k = CoefficientField::constant(s.mesh(), m.kappa0());
        let n = s.mesh().curve("Gamma").unwrap().len();
        let x = solve_direct(&s, &k, &vec![c(0.0, 0.0); n], &m).unwrap();
        assert!(x.iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn solution_is_linear_in_data() {
        let s = space(0.15);
        let m = MediumConfig::default();
        let solver = DirectSolver::new(s.clone(), &CoefficientField::constant(s.mesh(), m.kappa0()), &m).unwrap();
        let n = s.mesh().curve("Gamma").unwrap().len();
        let g1: Vec<C64> = (0..n).map(|i| c((i as f64).sin(), 0.2)).collect();
        let g2: Vec<C64> = (0..n).map(|i| c(0.1, (i as f64 * 0.7).cos())).collect();
        let sum: Vec<C64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        let x1 = solver.solve(&[g1]).unwrap();
        let x2 = solver.solve(&[g2]).unwrap();
        let x12 = solver.solve(&[sum]).unwrap();
        let scale = x12.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for ((a, b), s) in x1.iter().zip(&x2).zip(&x12) {
            assert!((a + b - s).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn plane_wave_converges_at_first_order() {
        let m = MediumConfig::default();
        let w = IncidentWave::from_angle(0.4);
        let errors: Vec<f64> = [0.16, 0.08]
            .iter()
            .map(|&h| {
                let s = space(h);
                let g = plane_wave_neumann(&w, &m, s.mesh().curve("Gamma").unwrap());
                let k = CoefficientField::constant(s.mesh(), m.kappa0());
                let x = solve_direct(&s, &k, &g, &m).unwrap();
                plane_wave_hcurl_error(&s, &x, &w, &m)
            })
            .collect();
        let rate = (errors[0] / errors[1]).log2();
        assert!((0.8..=1.2).contains(&rate), "errors {errors:?} rate {rate}");
    }

    #[test]
    fn trace_of_zero_field_is_zero_and_linear() {
        let s = space(0.2);
        let zero = vec![c(0.0, 0.0); s.dim()];
        assert!(s.tangential_trace("Gamma", &zero).unwrap().iter().all(|v| v.norm() == 0.0));
        let x: Vec<C64> = (0..s.dim()).map(|i| c(i as f64, 1.0)).collect();
        let two: Vec<C64> = x.iter().map(|v| v * 2.0).collect();
        let t1 = s.tangential_trace("Gamma", &x).unwrap();
        let t2 = s.tangential_trace("Gamma", &two).unwrap();
        for (a, b) in t1.iter().zip(&t2) {
            assert_eq!(a * 2.0, *b);
        }
        assert!(matches!(s.tangential_trace("none", &x), Err(Error::UnknownTag(_))));
    }

    fn sample_traces() -> TraceData {
        let mesh = Mesh2D::disk(1.0, 0.05, &[]).unwrap().tag_patches("Gamma", &PatchSpec::default()).unwrap();
        let curve = mesh.curve("Gamma0").unwrap();
        let mut t = TraceData::empty("Gamma0", curve);
        for m in 0..3 {
            t.waves.push(
                curve
                    .edges
                    .iter()
                    .map(|e| c(e.midpoint[0] + m as f64, e.midpoint[1].powi(2)))
                    .collect(),
            );
        }
        t
    }

    #[test]
    fn noise_level_is_exact() {
        let t = sample_traces();
        assert_eq!(add_noise(&t, 0.0, 1).unwrap(), t);
        for seed in [1, 2, 99] {
            let n = add_noise(&t, 0.02, seed).unwrap();
            for m in 0..t.num_waves() {
                let diff: Vec<C64> = n.waves[m].iter().zip(&t.waves[m]).map(|(a, b)| a - b).collect();
                let rel = (weighted_norm_sq(&diff, &t.lengths) / t.norm_sq(m)).sqrt();
                assert!((rel - 0.02).abs() < 1e-12, "{rel}");
            }
        }
        assert_eq!(add_noise(&t, 0.02, 7).unwrap(), add_noise(&t, 0.02, 7).unwrap());
        assert_ne!(add_noise(&t, 0.02, 7).unwrap(), add_noise(&t, 0.02, 8).unwrap());
        assert!(add_noise(&t, -0.1, 1).is_err());
    }

    #[test]
    fn resampling_reproduces_smooth_data() {
        let fine = Mesh2D::disk(1.0, 0.03, &[0.8]).unwrap();
        let coarse = Mesh2D::disk(1.0, 0.05, &[0.8]).unwrap();
        let f = |p: Point| c(p[1].atan2(p[0]).cos(), 2.0 * p[1].atan2(p[0]).sin());
        let src_curve = fine.curve("r=0.8").unwrap();
        let mut t = TraceData::empty("r=0.8", src_curve);
        t.waves.push(src_curve.edges.iter().map(|e| f(e.midpoint)).collect());
        let dst = coarse.curve("r=0.8").unwrap();
        let r = t.resample("r=0.8", dst);
        for (v, e) in r.waves[0].iter().zip(&dst.edges) {
            assert!((v - f(e.midpoint)).norm() < 2e-3);
        }
    }

    #[test]
    fn resampling_across_patch_gaps_uses_nearest() {
        let spec = PatchSpec::default();
        let fine = Mesh2D::disk(1.0, 0.02, &[]).unwrap().tag_patches("Gamma", &spec).unwrap();
        let coarse = Mesh2D::disk(1.0, 0.04, &[]).unwrap().tag_patches("Gamma", &spec).unwrap();
        let src = fine.curve("Gamma0").unwrap();
        let mut t = TraceData::empty("Gamma0", src);
        // piecewise constant per patch
        let patch = |e: &crate::mesh::CurveEdge| (e.angle().rem_euclid(2.0 * PI) / (2.0 * PI / 32.0)).round() % 32.0;
        t.waves.push(src.edges.iter().map(|e| c(patch(e), 0.0)).collect());
        let dst = coarse.curve("Gamma0").unwrap();
        let r = t.resample("Gamma0", dst);
        for (v, e) in r.waves[0].iter().zip(&dst.edges) {
            assert!((v.re - patch(e)).abs() < 1e-12);
        }
    }

    #[test]
    fn dataset_with_zero_amplitude_matches_background() {
        let input = SynthesisInput {
            geometry: Geometry::default(),
            medium: MediumConfig::default(),
            h: 0.1,
            support: Support::ball([-0.4, 0.0], 0.2),
            amplitude: 0.0,
            waves: IncidentWave::equally_spaced(3),
            sampling: Sampling::default(),
        };
        let d = synthesize_dataset(&input).unwrap();
        assert_eq!(d.gamma0_total, d.gamma0_background);
        assert!(d.interior_delta.energy() == 0.0);
    }

    #[test]
    fn dataset_has_one_nonzero_trace_per_wave() {
        let input = SynthesisInput {
            geometry: Geometry::default(),
            medium: MediumConfig::default(),
            h: 0.08,
            support: Support::ball([-0.4, 0.0], 0.2),
            amplitude: 0.1,
            waves: IncidentWave::equally_spaced(8),
            sampling: Sampling::default(),
        };
        let d = synthesize_dataset(&input).unwrap();
        assert_eq!(d.gamma0_total.num_waves(), 8);
        let delta = d.gamma0_delta().unwrap();
        for m in 0..8 {
            assert!(d.gamma0_total.norm_sq(m) > 0.0);
            assert!(delta.norm_sq(m) > 0.0);
        }
        // the difference trace on the interior curve peaks above the ball
        let p: Vec<f64> = (0..d.interior_delta.num_points())
            .map(|i| d.interior_delta.waves.iter().map(|w| w[i].norm_sqr()).sum())
            .collect();
        let imax = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        let x = d.interior_delta.midpoints[imax];
        let len = d.interior_delta.lengths[imax];
        assert!((x[0] + 0.8).hypot(x[1]) < 3.0 * len, "peak at {x:?}");
    }
}
