//! Parametric reconstructions: ball, ellipse, union of balls and Fourier
//! star, each minimizing `(params) ↦ min_a J(D(params), a)`.

use std::cell::Cell;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::CoefficientField;
use crate::forward::{Geometry, TraceData};
use crate::sensitivity::{taylor_traces, BackgroundSolver, TaylorTrace};
use crate::support::{hausdorff, perturbed_kappa, Sampling, Support};

use super::cost::{amplitude_opt, cost_j, CostPolynomial};
use super::optimize::{powell_minimize, PowellConfig};
use super::peaks::Peak;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    /// Initial Taylor truncation order.
    pub order: usize,
    /// Largest admissible ratio of the last Taylor term to the first at
    /// `amplitude_max`.
    pub tail_tol: f64,
    pub amplitude_max: f64,
    pub amplitude_tol: f64,
    pub powell: PowellConfig,
    /// Initial depth below the interior curve; half its radius if unset.
    pub depth0: Option<f64>,
    /// Initial radius; 0.15 times the domain radius if unset.
    pub radius0: Option<f64>,
    /// Initial Powell step of the length parameters.
    pub step: f64,
    /// Initial Powell step of the Fourier coefficients.
    pub fourier_step: f64,
    pub peak_threshold: f64,
    /// Inadmissible supports cost `penalty_factor × J(·, 0)`.
    pub penalty_factor: f64,
    pub sampling: Sampling,
    pub fourier_max: usize,
    pub improve_tol: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            order: 4,
            tail_tol: 0.01,
            amplitude_max: 0.99,
            amplitude_tol: 1e-5,
            powell: PowellConfig::default(),
            depth0: None,
            radius0: None,
            step: 0.05,
            fourier_step: 0.01,
            peak_threshold: 0.5,
            penalty_factor: 1e6,
            sampling: Sampling::default(),
            fourier_max: 3,
            improve_tol: 0.01,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.order == 0 {
            return bad("inversion.order must be at least 1".into());
        }
        if !(self.amplitude_max > 0.0 && self.amplitude_max < 1.0) {
            return bad(format!("inversion.amplitude_max = {} must lie in (0, 1)", self.amplitude_max));
        }
        if !(self.amplitude_tol > 0.0 && self.step > 0.0 && self.fourier_step > 0.0) {
            return bad("inversion tolerances and steps must be positive".into());
        }
        if !(self.peak_threshold > 0.0 && self.peak_threshold <= 1.0) {
            return bad(format!("inversion.peak_threshold = {} must lie in (0, 1]", self.peak_threshold));
        }
        if self.depth0.is_some_and(|d| !(d > 0.0)) || self.radius0.is_some_and(|r| !(r > 0.0)) {
            return bad("inversion.depth0 and radius0 must be positive".into());
        }
        if !(self.penalty_factor > 1.0) {
            return bad("inversion.penalty_factor must exceed 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub stage: String,
    pub support: Support,
    pub amplitude: f64,
    pub cost: f64,
    pub params: Vec<f64>,
    /// Depth of each component below the interior curve along its peak
    /// normal.
    pub depths: Vec<f64>,
    pub evaluations: usize,
    /// Best cost per optimizer iteration.
    pub trace: Vec<f64>,
    pub taylor_order: usize,
}

/// One line of the exact / approximation / relative error tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub name: String,
    pub exact: Vec<f64>,
    pub approx: Vec<f64>,
    pub rel_error: f64,
}

fn row(name: &str, exact: &[f64], approx: &[f64]) -> ErrorRow {
    let diff: f64 = exact.iter().zip(approx).map(|(e, a)| (e - a) * (e - a)).sum::<f64>().sqrt();
    let norm: f64 = exact.iter().map(|e| e * e).sum::<f64>().sqrt();
    ErrorRow {
        name: name.to_string(),
        exact: exact.to_vec(),
        approx: approx.to_vec(),
        rel_error: if norm > 0.0 { diff / norm } else { diff },
    }
}

fn components(s: &Support) -> Vec<&Support> {
    match s {
        Support::Union { parts } => parts.iter().collect(),
        other => vec![other],
    }
}

/// Relative errors of a reconstruction against the true support. Union
/// components are matched to the nearest exact center.
pub fn relative_errors(result: &ReconstructionResult, truth: &Support, a_exact: f64, r_int: f64) -> Vec<ErrorRow> {
    let mut rows = Vec::new();
    let exact_parts = components(truth);
    let approx_parts = components(&result.support);
    let multi = exact_parts.len() > 1;
    let mut used = vec![false; approx_parts.len()];
    for (i, ex) in exact_parts.iter().enumerate() {
        let Some(ce) = ex.center() else { continue };
        let best = approx_parts
            .iter()
            .enumerate()
            .filter(|(j, p)| !used[*j] && p.center().is_some())
            .min_by(|(_, p), (_, q)| {
                let d = |s: &Support| {
                    let c = s.center().unwrap();
                    (c[0] - ce[0]).hypot(c[1] - ce[1])
                };
                d(p).total_cmp(&d(q))
            })
            .map(|(j, _)| j);
        let Some(j) = best else { continue };
        used[j] = true;
        let ap = approx_parts[j];
        let suffix = if multi { format!(" {}", i + 1) } else { String::new() };
        let ca = ap.center().unwrap();
        rows.push(row(&format!("center{suffix}"), &ce, &ca));
        let depth_ex = r_int - ce[0].hypot(ce[1]);
        let depth_ap = result.depths.get(j).copied().unwrap_or(r_int - ca[0].hypot(ca[1]));
        rows.push(row(&format!("depth{suffix}"), &[depth_ex], &[depth_ap]));
        match (ex, ap) {
            (Support::Ball { r: re, .. }, _) | (Support::FourierStar { r0: re, .. }, _) => {
                let ra = match ap {
                    Support::Ball { r, .. } => *r,
                    Support::FourierStar { r0, .. } => *r0,
                    Support::Ellipse { rx, ry, .. } => 0.5 * (rx + ry),
                    Support::Union { .. } => f64::NAN,
                };
                rows.push(row(&format!("radius{suffix}"), &[*re], &[ra]));
            }
            (Support::Ellipse { rx, ry, .. }, Support::Ellipse { rx: ax, ry: ay, .. }) => {
                rows.push(row(&format!("rx{suffix}"), &[*rx], &[*ax]));
                rows.push(row(&format!("ry{suffix}"), &[*ry], &[*ay]));
            }
            (Support::Ellipse { rx, ry, .. }, Support::Ball { r, .. }) => {
                rows.push(row(&format!("rx{suffix}"), &[*rx], &[*r]));
                rows.push(row(&format!("ry{suffix}"), &[*ry], &[*r]));
            }
            _ => {}
        }
    }
    rows.push(row("amplitude", &[a_exact], &[result.amplitude]));
    let h = hausdorff(&truth.boundary_points(), &result.support.boundary_points());
    rows.push(ErrorRow {
        name: "hausdorff".into(),
        exact: vec![0.0],
        approx: vec![h],
        rel_error: h / truth.max_extent().max(f64::MIN_POSITIVE),
    });
    rows
}

/// Shape parametrizations along peak normals.
#[derive(Clone, Debug, PartialEq)]
enum Shape {
    /// `(d, r)`.
    Ball,
    /// `(d, rx, ry)`.
    Ellipse,
    /// `(d₁, r₁, …, d_P, r_P)`.
    Multi,
    /// `(d, r₀, a₁…a_N, b₁…b_N)`.
    Fourier(usize),
}

impl Shape {
    fn support(&self, peaks: &[Peak], p: &[f64]) -> Support {
        match self {
            Shape::Ball => Support::Ball {
                center: peaks[0].at_depth(p[0]),
                r: p[1],
            },
            Shape::Ellipse => Support::Ellipse {
                center: peaks[0].at_depth(p[0]),
                rx: p[1],
                ry: p[2],
            },
            Shape::Multi => Support::Union {
                parts: peaks
                    .iter()
                    .zip(p.chunks(2))
                    .map(|(pk, q)| Support::Ball {
                        center: pk.at_depth(q[0]),
                        r: q[1],
                    })
                    .collect(),
            },
            Shape::Fourier(n) => Support::FourierStar {
                center: peaks[0].at_depth(p[0]),
                r0: p[1],
                coeffs: (0..*n).map(|k| (p[2 + k], p[2 + n + k])).collect(),
            },
        }
    }

    fn depths(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Shape::Multi => p.chunks(2).map(|q| q[0]).collect(),
            _ => vec![p[0]],
        }
    }

    fn name(&self) -> String {
        match self {
            Shape::Ball => "ball".into(),
            Shape::Ellipse => "ellipse".into(),
            Shape::Multi => "multi".into(),
            Shape::Fourier(n) => format!("fourier(Nr={n})"),
        }
    }
}

/// Best amplitude and profiled cost of one support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Profile {
    pub amplitude: f64,
    pub cost: f64,
    pub admissible: bool,
    pub order: usize,
}

/// Data on the interior curve of the inverse mesh together with the
/// background factorization shared by every cost evaluation.
pub struct InversionProblem<'a> {
    bg: &'a BackgroundSolver,
    data: TraceData,
    geometry: Geometry,
    cfg: InversionConfig,
    penalty: f64,
    evaluations: Cell<usize>,
}

impl<'a> InversionProblem<'a> {
    /// `data` may live on another discretization of the interior curve; it
    /// is resampled by angle.
    pub fn new(bg: &'a BackgroundSolver, data: &TraceData, geometry: &Geometry, cfg: &InversionConfig) -> Result<Self> {
        cfg.validate()?;
        geometry.validate()?;
        let tag = geometry.interior_tag();
        let curve = bg.space().mesh().curve(&tag)?;
        if data.num_waves() != bg.fields().len() {
            return Err(Error::DimensionMismatch(format!(
                "{} data waves for {} background fields",
                data.num_waves(),
                bg.fields().len()
            )));
        }
        let data = if data.tag == tag && data.midpoints == curve.midpoints() {
            data.clone()
        } else {
            data.resample(&tag, curve)
        };
        let energy = 0.5 * data.energy();
        Ok(InversionProblem {
            bg,
            data,
            geometry: geometry.clone(),
            cfg: cfg.clone(),
            penalty: cfg.penalty_factor * energy.max(f64::MIN_POSITIVE),
            evaluations: Cell::new(0),
        })
    }

    pub fn data(&self) -> &TraceData {
        &self.data
    }

    pub fn config(&self) -> &InversionConfig {
        &self.cfg
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// Profile evaluations so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.get()
    }

    pub fn taylor(&self, support: &Support) -> Result<TaylorTrace> {
        let chi = support.indicator(self.bg.space().mesh(), self.cfg.sampling);
        taylor_traces(
            self.bg,
            &chi,
            &self.data.tag,
            self.cfg.order,
            self.cfg.amplitude_max,
            self.cfg.tail_tol,
        )
    }

    /// `J(D, a)` by direct evaluation of the Taylor sum.
    pub fn cost(&self, support: &Support, a: f64) -> Result<f64> {
        cost_j(&self.data, &self.taylor(support)?, a)
    }

    /// `min_a J(D, a)`, or the penalty when `D` leaves the admissible
    /// region or misses the mesh.
    pub fn profile(&self, support: &Support) -> Result<Profile> {
        self.evaluations.set(self.evaluations.get() + 1);
        let out = Profile {
            amplitude: 0.0,
            cost: self.penalty,
            admissible: false,
            order: 0,
        };
        if !support.is_admissible(self.geometry.r_known) {
            return Ok(out);
        }
        let tt = match self.taylor(support) {
            Ok(tt) => tt,
            Err(Error::DegenerateSupport) => return Ok(out),
            Err(e) => return Err(e),
        };
        let poly = CostPolynomial::new(&self.data, &tt)?;
        let g = amplitude_opt(&poly, self.cfg.amplitude_max, self.cfg.amplitude_tol)?;
        Ok(Profile {
            amplitude: g.x,
            cost: g.value,
            admissible: true,
            order: tt.order(),
        })
    }

    fn depth0(&self) -> f64 {
        self.cfg.depth0.unwrap_or(0.5 * self.geometry.r_int)
    }

    fn radius0(&self) -> f64 {
        self.cfg.radius0.unwrap_or(0.15 * self.geometry.radius)
    }

    fn run(&self, shape: Shape, peaks: &[Peak], x0: Vec<f64>, step: Vec<f64>) -> Result<ReconstructionResult> {
        let start = self.evaluations();
        let objective = |p: &[f64]| -> Result<f64> { Ok(self.profile(&shape.support(peaks, p))?.cost) };
        let r = powell_minimize(objective, &x0, &step, &self.cfg.powell)?;
        let support = shape.support(peaks, &r.x);
        let prof = self.profile(&support)?;
        // report the directly evaluated misfit so it can be re-derived
        let cost = if prof.admissible {
            self.cost(&support, prof.amplitude)?
        } else {
            prof.cost
        };
        info!(
            "{} stage: cost {:.6e}, amplitude {:.5}, {} Powell iterations, {} evaluations",
            shape.name(),
            cost,
            prof.amplitude,
            r.iterations,
            self.evaluations() - start
        );
        debug!("{} parameters {:?}", shape.name(), r.x);
        if prof.order > self.cfg.order {
            warn!(
                "Taylor order raised from {} to {} to keep the tail below {} at |a| = {}",
                self.cfg.order, prof.order, self.cfg.tail_tol, self.cfg.amplitude_max
            );
        }
        Ok(ReconstructionResult {
            stage: shape.name(),
            support,
            amplitude: prof.amplitude,
            cost,
            depths: shape.depths(&r.x),
            params: r.x,
            evaluations: self.evaluations() - start,
            trace: r.trace,
            taylor_order: prof.order,
        })
    }

    /// Ball `D(x̂ − d·n̂, r)` below one peak.
    pub fn reconstruct_ball(&self, peak: &Peak) -> Result<ReconstructionResult> {
        let s = self.cfg.step;
        self.run(Shape::Ball, std::slice::from_ref(peak), vec![self.depth0(), self.radius0()], vec![s, s])
    }

    /// Axis-aligned ellipse, warm-started from a ball result when given.
    pub fn reconstruct_ellipse(&self, peak: &Peak, init: Option<&ReconstructionResult>) -> Result<ReconstructionResult> {
        let (d, r) = match init {
            Some(b) => ball_params(b)?,
            None => (self.depth0(), self.radius0()),
        };
        let s = self.cfg.step;
        self.run(Shape::Ellipse, std::slice::from_ref(peak), vec![d, r, r], vec![s, s, s])
    }

    /// Union of one ball per peak sharing a single amplitude.
    pub fn reconstruct_multi(&self, peaks: &[Peak]) -> Result<ReconstructionResult> {
        if peaks.is_empty() {
            return Err(Error::NoPeak("union reconstruction needs at least one peak".into()));
        }
        let x0: Vec<f64> = peaks.iter().flat_map(|_| [self.depth0(), self.radius0()]).collect();
        let step = vec![self.cfg.step; x0.len()];
        self.run(Shape::Multi, peaks, x0, step)
    }

    /// Fourier star refinement. With a ball warm start the number of
    /// modes grows from 1 until the relative cost improvement of a stage
    /// with at least two modes falls below `improve_tol`; without it, all `fourier_max` modes are optimized at
    /// once from the default initial guess.
    pub fn refine_fourier(&self, peak: &Peak, init: Option<&ReconstructionResult>) -> Result<ReconstructionResult> {
        let peaks = std::slice::from_ref(peak);
        let nmax = self.cfg.fourier_max.max(1);
        let step_for = |n: usize| {
            let mut s = vec![self.cfg.step, self.cfg.step];
            s.extend(std::iter::repeat_n(self.cfg.fourier_step, 2 * n));
            s
        };
        let Some(ball) = init else {
            let mut x0 = vec![self.depth0(), self.radius0()];
            x0.extend(std::iter::repeat_n(0.0, 2 * nmax));
            return self.run(Shape::Fourier(nmax), peaks, x0, step_for(nmax));
        };
        let (d, r) = ball_params(ball)?;
        let mut best = ball.clone();
        let mut prev = (d, r, Vec::<f64>::new(), Vec::<f64>::new());
        let mut evaluations = 0;
        let mut trace = ball.trace.clone();
        for n in 1..=nmax {
            let mut x0 = vec![prev.0, prev.1];
            let mut a = prev.2.clone();
            let mut b = prev.3.clone();
            a.resize(n, 0.0);
            b.resize(n, 0.0);
            x0.extend(&a);
            x0.extend(&b);
            let res = self.run(Shape::Fourier(n), peaks, x0, step_for(n))?;
            evaluations += res.evaluations;
            trace.extend(res.trace.iter().skip(1));
            let improvement = (best.cost - res.cost) / best.cost.max(f64::MIN_POSITIVE);
            if res.cost < best.cost {
                prev = (res.params[0], res.params[1], res.params[2..2 + n].to_vec(), res.params[2 + n..].to_vec());
                best = res;
            }
            // a single mode is first-order a translation, which the center
            // already accounts for; stalls are judged from two modes on
            if n >= 2 && improvement < self.cfg.improve_tol {
                break;
            }
        }
        best.evaluations = evaluations;
        best.trace = trace;
        Ok(best)
    }

    /// `κ₀(1 + a·χ_D)` on the inverse mesh.
    pub fn field(&self, result: &ReconstructionResult) -> CoefficientField {
        perturbed_kappa(
            self.bg.space().mesh(),
            self.bg.medium().kappa0(),
            &result.support,
            result.amplitude,
            self.cfg.sampling,
        )
    }

    /// Recomputes the cost of a result from scratch through the direct
    /// Taylor sum.
    pub fn recheck(&self, result: &ReconstructionResult) -> Result<f64> {
        self.cost(&result.support, result.amplitude)
    }
}

fn ball_params(r: &ReconstructionResult) -> Result<(f64, f64)> {
    match (&r.support, r.depths.first()) {
        (Support::Ball { r: rad, .. }, Some(d)) => Ok((*d, *rad)),
        (Support::FourierStar { r0, .. }, Some(d)) => Ok((*d, *r0)),
        _ => Err(Error::InvalidParameter(format!(
            "stage '{}' cannot warm-start from a non-ball result",
            r.stage
        ))),
    }
}

/// Normal at angle `theta` of a circle centered at the origin.
pub fn radial_peak(r: f64, theta: f64) -> Peak {
    let n = [theta.cos(), theta.sin()];
    Peak {
        point: [r * n[0], r * n[1]],
        normal: n,
        height: 1.0,
    }
}
