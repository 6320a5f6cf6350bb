//! Iterated quasi-reversibility for the Cauchy problem on the known ring:
//! recovers `(E, F = curl E)` from `E·τ` and `curl E` on Γ₀ and transmits
//! the field to an interior curve.

use std::sync::Arc;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_boundary_mass, assemble_curl_nodal, assemble_curlcurl, assemble_mixed_curl,
    assemble_nodal_boundary_mass, assemble_nodal_mass, assemble_nodal_stiffness,
    assemble_weighted_mass, boundary_load_from_samples, nodal_boundary_load, EdgeSpace,
    Factorization, NodalSpace, SparseComplexMatrix, TripletBuilder, C64,
};
use crate::forward::{MediumConfig, TraceData};
use crate::mesh::Mesh2D;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QrConfig {
    pub delta: f64,
    pub max_iters: usize,
    pub rel_change_tol: f64,
    pub scaled: bool,
}

impl Default for QrConfig {
    fn default() -> Self {
        QrConfig {
            delta: 0.1,
            max_iters: 50,
            rel_change_tol: 1e-3,
            scaled: false,
        }
    }
}

impl QrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!("qr.delta = {} must be positive", self.delta)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("qr.max_iters must be at least 1".into()));
        }
        if !(self.rel_change_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "qr.rel_change_tol = {} must be non-negative",
                self.rel_change_tol
            )));
        }
        Ok(())
    }
}

/// Discrete least-squares form of
/// `(E, F) ↦ (curl F − αE, curl E − βF, E·τ|Γ₀, F|Γ₀)` with
/// `α = k²κ₀, β = 1`, or `α = β = k√κ₀` for the scaled variant.
pub struct QrOperator {
    edge: EdgeSpace,
    nodal: NodalSpace,
    gamma0: String,
    alpha: C64,
    beta: C64,
    /// Scale applied to the Neumann data (`1/(k√κ₀)` when scaled).
    data_scale: C64,
    /// Pieces of `AᴴA`, kept apart for block residuals.
    mass_e: SparseComplexMatrix,
    curlcurl: SparseComplexMatrix,
    bmass_e: SparseComplexMatrix,
    stiff_f: SparseComplexMatrix,
    mass_f: SparseComplexMatrix,
    bmass_f: SparseComplexMatrix,
    mixed: SparseComplexMatrix,
    curl_nodal: SparseComplexMatrix,
    normal: SparseComplexMatrix,
    penalty: SparseComplexMatrix,
}

impl std::fmt::Debug for QrOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QrOperator")
            .field("edges", &self.edge.dim())
            .field("nodes", &self.nodal.dim())
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .finish()
    }
}

/// Squared norms of the four residual blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockResiduals {
    pub curl_f: f64,
    pub curl_e: f64,
    pub trace_e: f64,
    pub trace_f: f64,
}

impl BlockResiduals {
    pub fn total(&self) -> f64 {
        self.curl_f + self.curl_e + self.trace_e + self.trace_f
    }
}

fn one() -> C64 {
    Complex64::new(1.0, 0.0)
}

/// Block matrix `[[a, b], [c, d]]`.
fn blocks(
    a: &SparseComplexMatrix,
    b: &SparseComplexMatrix,
    c: &SparseComplexMatrix,
    d: &SparseComplexMatrix,
) -> SparseComplexMatrix {
    let (n1, n2) = (a.nrows(), d.nrows());
    let mut t = TripletBuilder::new(n1 + n2, n1 + n2);
    for (r, cc, v) in a.iter() {
        t.add(r, cc, v);
    }
    for (r, cc, v) in b.iter() {
        t.add(r, n1 + cc, v);
    }
    for (r, cc, v) in c.iter() {
        t.add(n1 + r, cc, v);
    }
    for (r, cc, v) in d.iter() {
        t.add(n1 + r, n1 + cc, v);
    }
    t.build()
}

fn adjoint(m: &SparseComplexMatrix) -> SparseComplexMatrix {
    SparseComplexMatrix::from_triplets(m.ncols(), m.nrows(), m.iter().map(|(r, c, v)| (c, r, v.conj())))
}

/// `Re(yᴴ M x)`.
fn re_form(m: &SparseComplexMatrix, y: &[C64], x: &[C64]) -> f64 {
    m.form(y, x).re
}

impl QrOperator {
    pub fn assemble(mesh: Arc<Mesh2D>, medium: &MediumConfig, gamma0: &str, scaled: bool) -> Result<QrOperator> {
        medium.validate()?;
        mesh.curve(gamma0)?;
        let edge = EdgeSpace::new(mesh.clone());
        let nodal = NodalSpace::new(mesh.clone());
        let k = medium.wavenumber();
        let kappa0 = medium.kappa0();
        let (alpha, beta, data_scale) = if scaled {
            let p = medium.propagation();
            (p, p, one() / p)
        } else {
            (kappa0 * k * k, one(), one())
        };
        let mass_e = assemble_weighted_mass(&edge, &vec![one(); mesh.num_triangles()])?;
        let curlcurl = assemble_curlcurl(&edge);
        let bmass_e = assemble_boundary_mass(&edge, gamma0)?;
        let stiff_f = assemble_nodal_stiffness(&nodal);
        let mass_f = assemble_nodal_mass(&nodal);
        let bmass_f = assemble_nodal_boundary_mass(&nodal, gamma0)?;
        let mixed = assemble_mixed_curl(&nodal, &edge)?;
        let curl_nodal = assemble_curl_nodal(&edge, &nodal)?;

        let nee = mass_e
            .scaled(Complex64::new(alpha.norm_sqr(), 0.0))
            .combine(one(), &curlcurl, one())?
            .combine(one(), &bmass_e, one())?;
        let nef = mixed.combine(-alpha.conj(), &curl_nodal, -beta)?;
        let nff = stiff_f
            .combine(one(), &mass_f, Complex64::new(beta.norm_sqr(), 0.0))?
            .combine(one(), &bmass_f, one())?;
        let normal = blocks(&nee, &nef, &adjoint(&nef), &nff);
        let zero_ef = SparseComplexMatrix::zeros(edge.dim(), nodal.dim());
        let zero_fe = SparseComplexMatrix::zeros(nodal.dim(), edge.dim());
        let penalty = blocks(&mass_e, &zero_ef, &zero_fe, &mass_f);
        Ok(QrOperator {
            edge,
            nodal,
            gamma0: gamma0.to_string(),
            alpha,
            beta,
            data_scale,
            mass_e,
            curlcurl,
            bmass_e,
            stiff_f,
            mass_f,
            bmass_f,
            mixed,
            curl_nodal,
            normal,
            penalty,
        })
    }

    pub fn edge_space(&self) -> &EdgeSpace {
        &self.edge
    }

    pub fn nodal_space(&self) -> &NodalSpace {
        &self.nodal
    }

    pub fn dim(&self) -> usize {
        self.edge.dim() + self.nodal.dim()
    }

    /// `AᴴA` as a Hermitian matrix on `x = (E, F)`.
    pub fn normal_matrix(&self) -> &SparseComplexMatrix {
        &self.normal
    }

    /// L² pair inner product matrix on `(E, F)`.
    pub fn penalty_matrix(&self) -> &SparseComplexMatrix {
        &self.penalty
    }

    /// `Aᴴy` and `‖y‖²` for data `y = (0, 0, g_D, g_N)` sampled at the Γ₀
    /// edge midpoints.
    pub fn rhs(&self, g_d: &[C64], g_n: &[C64]) -> Result<(Vec<C64>, f64)> {
        let curve = self.edge.mesh().curve(&self.gamma0)?;
        let g_n: Vec<C64> = g_n.iter().map(|v| v * self.data_scale).collect();
        let mut r = boundary_load_from_samples(&self.edge, &self.gamma0, g_d)?;
        r.extend(nodal_boundary_load(&self.nodal, &self.gamma0, &g_n)?);
        let lengths = curve.lengths();
        let y2 = crate::forward::weighted_norm_sq(g_d, &lengths) + crate::forward::weighted_norm_sq(&g_n, &lengths);
        Ok((r, y2))
    }

    /// `‖Ax − y‖²` through the normal form.
    pub fn residual_sq(&self, x: &[C64], r: &[C64], y2: f64) -> f64 {
        let xr: C64 = x.iter().zip(r).map(|(a, b)| a.conj() * b).sum();
        (self.normal.form(x, x).re - 2.0 * xr.re + y2).max(0.0)
    }

    /// Squared norms of each residual block of `A(E, F) − (0, 0, g_D, g_N)`.
    pub fn block_residuals(&self, e: &[C64], f: &[C64], g_d: &[C64], g_n: &[C64]) -> Result<BlockResiduals> {
        let a = self.alpha;
        let b = self.beta;
        let curve = self.edge.mesh().curve(&self.gamma0)?;
        let lengths = curve.lengths();
        let g_n: Vec<C64> = g_n.iter().map(|v| v * self.data_scale).collect();
        let cross_f = self.mixed.form(e, f) * a.conj();
        let curl_f = re_form(&self.stiff_f, f, f) + a.norm_sqr() * re_form(&self.mass_e, e, e) - 2.0 * cross_f.re;
        let cross_e = self.curl_nodal.form(e, f) * b;
        let curl_e = re_form(&self.curlcurl, e, e) + b.norm_sqr() * re_form(&self.mass_f, f, f) - 2.0 * cross_e.re;
        let le = boundary_load_from_samples(&self.edge, &self.gamma0, g_d)?;
        let lf = nodal_boundary_load(&self.nodal, &self.gamma0, &g_n)?;
        let dot = |x: &[C64], y: &[C64]| -> f64 { x.iter().zip(y).map(|(p, q)| p.conj() * q).sum::<C64>().re };
        let trace_e = re_form(&self.bmass_e, e, e) - 2.0 * dot(e, &le) + crate::forward::weighted_norm_sq(g_d, &lengths);
        let trace_f =
            re_form(&self.bmass_f, f, f) - 2.0 * dot(f, &lf) + crate::forward::weighted_norm_sq(&g_n, &lengths);
        Ok(BlockResiduals {
            curl_f: curl_f.max(0.0),
            curl_e: curl_e.max(0.0),
            trace_e: trace_e.max(0.0),
            trace_f: trace_f.max(0.0),
        })
    }

    /// Factorizes `AᴴA + δB` once for any number of data sets.
    pub fn solver(&self, cfg: &QrConfig) -> Result<QrSolver<'_>> {
        cfg.validate()?;
        let m = self
            .normal
            .combine(one(), &self.penalty, Complex64::new(cfg.delta, 0.0))?;
        Ok(QrSolver {
            op: self,
            factor: Factorization::new(&m)?,
            cfg: *cfg,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QrState {
    pub e: Vec<C64>,
    pub f: Vec<C64>,
    /// `‖Ax_M − y‖` for `M = 0, 1, …`.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    /// Number of steps where the residual grew beyond round-off.
    pub residual_increases: usize,
}

pub struct QrSolver<'a> {
    op: &'a QrOperator,
    factor: Factorization,
    cfg: QrConfig,
}

impl QrSolver<'_> {
    pub fn config(&self) -> &QrConfig {
        &self.cfg
    }

    /// `x_M = (AᴴA + δB)⁻¹(Aᴴy + δB x_{M−1})`, `x_{−1} = 0`.
    pub fn iterate(&self, g_d: &[C64], g_n: &[C64]) -> Result<QrState> {
        let op = self.op;
        let (r, y2) = op.rhs(g_d, g_n)?;
        let delta = self.cfg.delta;
        let mut x = vec![Complex64::new(0.0, 0.0); op.dim()];
        let mut history = Vec::new();
        let mut increases = 0;
        let mut iterations = 0;
        let round_off = 1e-12 * y2.max(f64::MIN_POSITIVE);
        for m in 0..self.cfg.max_iters {
            let bx = op.penalty.matvec(&x);
            let rhs: Vec<C64> = r.iter().zip(&bx).map(|(a, b)| a + b * delta).collect();
            let next = self.factor.solve(&rhs);
            let change: Vec<C64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
            let change_norm = op.penalty.form(&change, &change).re.max(0.0).sqrt();
            let size = op.penalty.form(&next, &next).re.max(0.0).sqrt();
            x = next;
            iterations = m + 1;
            let res2 = op.residual_sq(&x, &r, y2);
            if let Some(&prev) = history.last() {
                let prev: f64 = prev;
                if res2 > prev * prev + round_off {
                    increases += 1;
                    warn!(
                        "quasi-reversibility residual increased at step {m}: {:.6e} -> {:.6e}",
                        prev,
                        res2.sqrt()
                    );
                }
            }
            history.push(res2.sqrt());
            if size == 0.0 || change_norm < self.cfg.rel_change_tol * size {
                break;
            }
        }
        let f = x.split_off(op.edge.dim());
        Ok(QrState {
            e: x,
            f,
            residual_history: history,
            iterations,
            residual_increases: increases,
        })
    }

    /// Independent iterations for several data sets, in parallel.
    pub fn iterate_many(&self, data: &[(Vec<C64>, Vec<C64>)]) -> Result<Vec<QrState>> {
        data.par_iter().map(|(d, n)| self.iterate(d, n)).collect()
    }
}

/// One-shot iteration for a single data set.
pub fn qr_iterate(op: &QrOperator, g_d: &[C64], g_n: &[C64], cfg: &QrConfig) -> Result<QrState> {
    op.solver(cfg)?.iterate(g_d, g_n)
}

/// Tangential traces of the recovered fields on curve `tag`.
pub fn completed_trace(op: &QrOperator, states: &[QrState], tag: &str) -> Result<TraceData> {
    let fields: Vec<Vec<C64>> = states.iter().map(|s| s.e.clone()).collect();
    TraceData::from_fields(&op.edge, tag, &fields)
}

/// Transmits difference data given on Γ₀ of another mesh (any sampling,
/// resampled by angle) to curve `interior_tag` of the ring mesh. The
/// Neumann part of the difference data is zero.
pub fn complete_difference_data(
    op: &QrOperator,
    delta_gamma0: &TraceData,
    cfg: &QrConfig,
    interior_tag: &str,
) -> Result<(TraceData, Vec<QrState>)> {
    let curve = op.edge.mesh().curve(&op.gamma0)?;
    let local = delta_gamma0.resample(&op.gamma0, curve);
    let zero = vec![Complex64::new(0.0, 0.0); curve.len()];
    let data: Vec<(Vec<C64>, Vec<C64>)> = local.waves.iter().map(|w| (w.clone(), zero.clone())).collect();
    let states = op.solver(cfg)?.iterate_many(&data)?;
    Ok((completed_trace(op, &states, interior_tag)?, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::IncidentWave;
    use crate::mesh::PatchSpec;

    fn ring(h: f64) -> Arc<Mesh2D> {
        Arc::new(
            Mesh2D::annulus(0.7, 1.0, h, &[0.8])
                .unwrap()
                .tag_patches("Gamma_outer", &PatchSpec::default())
                .unwrap(),
        )
    }

    fn plane_wave_data(op: &QrOperator, m: &MediumConfig) -> (Vec<C64>, Vec<C64>) {
        let w = IncidentWave::from_angle(0.7);
        let curve = op.edge_space().mesh().curve("Gamma0").unwrap();
        let gd = curve
            .edges
            .iter()
            .map(|e| {
                let v = w.field(m, e.midpoint);
                let t = e.tangent();
                v[0] * t[0] + v[1] * t[1]
            })
            .collect();
        let gn = curve.edges.iter().map(|e| w.curl(m, e.midpoint)).collect();
        (gd, gn)
    }

    #[test]
    fn zero_input_zero_output() {
        let m = MediumConfig::default();
        let op = QrOperator::assemble(ring(0.1), &m, "Gamma0", false).unwrap();
        let n = op.edge_space().mesh().curve("Gamma0").unwrap().len();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        let r = op
            .block_residuals(&vec![Complex64::new(0.0, 0.0); op.edge_space().dim()], &vec![Complex64::new(0.0, 0.0); op.nodal_space().dim()], &zero, &zero)
            .unwrap();
        assert_eq!(r.total(), 0.0);
        let s = qr_iterate(&op, &zero, &zero, &QrConfig::default()).unwrap();
        assert!(s.e.iter().chain(&s.f).all(|v| v.norm() == 0.0));
        let t = completed_trace(&op, &[s], "r=0.8").unwrap();
        assert_eq!(t.energy(), 0.0);
    }

    #[test]
    fn normal_form_is_hermitian_positive_definite() {
        let m = MediumConfig::default();
        let op = QrOperator::assemble(ring(0.15), &m, "Gamma0", false).unwrap();
        let n = op.dim();
        let total = op.normal_matrix().combine(one(), op.penalty_matrix(), Complex64::new(0.1, 0.0)).unwrap();
        let dense = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| {
            let v = total.get(i, j);
            faer::c64::new(v.re, v.im)
        });
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (total.get(i, j), total.get(j, i).conj());
                assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
            }
        }
        let eig = dense.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(eig[0] > 0.0, "{}", eig[0]);
    }

    #[test]
    fn block_residuals_add_up_to_normal_form() {
        let m = MediumConfig::default();
        let op = QrOperator::assemble(ring(0.12), &m, "Gamma0", false).unwrap();
        let (gd, gn) = plane_wave_data(&op, &m);
        let x: Vec<C64> = (0..op.dim()).map(|i| Complex64::new((i as f64 * 0.1).sin(), (i as f64 * 0.3).cos())).collect();
        let (r, y2) = op.rhs(&gd, &gn).unwrap();
        let ne = op.edge_space().dim();
        let b = op.block_residuals(&x[..ne], &x[ne..], &gd, &gn).unwrap();
        let q = op.residual_sq(&x, &r, y2);
        assert!((b.total() - q).abs() <= 1e-10 * q);
    }

    #[test]
    fn residual_is_monotone_and_iteration_is_linear() {
        let m = MediumConfig::default();
        let op = QrOperator::assemble(ring(0.1), &m, "Gamma0", false).unwrap();
        let (gd, gn) = plane_wave_data(&op, &m);
        let cfg = QrConfig {
            rel_change_tol: 0.0,
            max_iters: 12,
            ..QrConfig::default()
        };
        let s1 = qr_iterate(&op, &gd, &gn, &cfg).unwrap();
        assert_eq!(s1.iterations, 12);
        assert_eq!(s1.residual_increases, 0);
        for w in s1.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let a = Complex64::new(-0.3, 2.0);
        let gd2: Vec<C64> = gd.iter().map(|v| v * a).collect();
        let gn2: Vec<C64> = gn.iter().map(|v| v * a).collect();
        let s2 = qr_iterate(&op, &gd2, &gn2, &cfg).unwrap();
        let scale = s1.e.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (p, q) in s1.e.iter().zip(&s2.e) {
            assert!((p * a - q).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn recovers_plane_wave_in_the_ring() {
        let m = MediumConfig::default();
        let mesh = ring(0.05);
        let w = IncidentWave::from_angle(0.7);
        let exact: Vec<C64> = mesh
            .curve("r=0.8")
            .unwrap()
            .edges
            .iter()
            .map(|e| {
                let v = w.field(&m, e.midpoint);
                let t = e.tangent();
                v[0] * t[0] + v[1] * t[1]
            })
            .collect();
        let mut traces = Vec::new();
        for scaled in [false, true] {
            let op = QrOperator::assemble(mesh.clone(), &m, "Gamma0", scaled).unwrap();
            let (gd, gn) = plane_wave_data(&op, &m);
            let s = qr_iterate(&op, &gd, &gn, &QrConfig::default()).unwrap();
            let t = completed_trace(&op, &[s], "r=0.8").unwrap();
            let lengths = &t.lengths;
            let diff: Vec<C64> = t.waves[0].iter().zip(&exact).map(|(a, b)| a - b).collect();
            let rel = (crate::forward::weighted_norm_sq(&diff, lengths) / crate::forward::weighted_norm_sq(&exact, lengths)).sqrt();
            assert!(rel < 0.1, "scaled={scaled} rel={rel}");
            traces.push(t);
        }
        // both variants describe the same field
        let lengths = &traces[0].lengths;
        let diff: Vec<C64> = traces[0].waves[0].iter().zip(&traces[1].waves[0]).map(|(a, b)| a - b).collect();
        let rel = (crate::forward::weighted_norm_sq(&diff, lengths) / traces[0].norm_sq(0)).sqrt();
        assert!(rel < 0.1, "{rel}");
    }
}
