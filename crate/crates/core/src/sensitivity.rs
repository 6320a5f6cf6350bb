//! Successive amplitude derivatives of the field at `a = 0` and the
//! truncated Taylor expansion of the trace map.

use std::sync::Arc;

use log::debug;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{apply_weighted_mass, CoefficientField, EdgeSpace, Factorization, C64};
use crate::forward::{weighted_norm_sq, DirectSolver, IncidentWave, MediumConfig};
use crate::mesh::Mesh2D;

/// Highest order the automatic truncation check may reach.
pub const MAX_ORDER: usize = 10;

/// Background problem `κ ≡ κ₀`: its factorization and the fields of every
/// incident wave.
#[derive(Debug)]
pub struct BackgroundSolver {
    solver: DirectSolver,
    medium: MediumConfig,
    fields: Vec<Vec<C64>>,
}

impl BackgroundSolver {
    pub fn new(mesh: Arc<Mesh2D>, medium: &MediumConfig, waves: &[IncidentWave]) -> Result<BackgroundSolver> {
        medium.validate()?;
        let space = EdgeSpace::new(mesh.clone());
        let kappa = CoefficientField::constant(&mesh, medium.kappa0());
        let solver = DirectSolver::new(space, &kappa, medium)?;
        let fields = solver.solve_waves(waves, medium)?;
        Ok(BackgroundSolver {
            solver,
            medium: *medium,
            fields,
        })
    }

    pub fn space(&self) -> &EdgeSpace {
        self.solver.space()
    }

    pub fn factorization(&self) -> &Factorization {
        self.solver.factorization()
    }

    pub fn fields(&self) -> &[Vec<C64>] {
        &self.fields
    }

    pub fn medium(&self) -> &MediumConfig {
        &self.medium
    }
}

/// `E⁽⁰⁾…E⁽ᴺ⁾` for every wave; `fields[m][n]`.
#[derive(Clone, Debug)]
pub struct SensitivityChain {
    pub fields: Vec<Vec<Vec<C64>>>,
}

impl SensitivityChain {
    pub fn order(&self) -> usize {
        self.fields.first().map_or(0, |f| f.len() - 1)
    }
}

/// Per-triangle weights `κ₀χ_D`; fails when the support misses the mesh.
pub fn support_weights(kappa0: C64, chi: &[f64]) -> Result<Vec<C64>> {
    if chi.iter().all(|&c| c == 0.0) {
        return Err(Error::DegenerateSupport);
    }
    Ok(chi.iter().map(|&c| kappa0 * c).collect())
}

/// Solves `A E⁽ⁿ⁾ = n k² M_D E⁽ⁿ⁻¹⁾` for `n = 1…order`, reusing the
/// background factorization.
pub fn sensitivity_chain(bg: &BackgroundSolver, chi: &[f64], order: usize) -> Result<SensitivityChain> {
    if order == 0 {
        return Err(Error::InvalidParameter("Taylor order must be at least 1".into()));
    }
    let mut chain = SensitivityChain {
        fields: bg.fields.iter().map(|e0| vec![e0.clone()]).collect(),
    };
    chain.extend(bg, chi, order)?;
    Ok(chain)
}

impl SensitivityChain {
    /// Continues the recursion up to `order`.
    pub fn extend(&mut self, bg: &BackgroundSolver, chi: &[f64], order: usize) -> Result<()> {
        let weights = support_weights(bg.medium.kappa0(), chi)?;
        let k2 = bg.medium.wavenumber().powi(2);
        self.fields.par_iter_mut().try_for_each(|chain| -> Result<()> {
            for n in chain.len()..=order {
                let mut rhs = apply_weighted_mass(bg.space(), &weights, &chain[n - 1])?;
                let s = n as f64 * k2;
                rhs.iter_mut().for_each(|v| *v *= s);
                chain.push(bg.factorization().solve(&rhs));
            }
            Ok(())
        })
    }
}

/// Traces `T⁽ⁿ⁾` of the derivatives on a measurement curve; `traces[m][n-1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorTrace {
    pub tag: String,
    pub lengths: Vec<f64>,
    pub traces: Vec<Vec<Vec<C64>>>,
}

impl TaylorTrace {
    pub fn from_chain(space: &EdgeSpace, chain: &SensitivityChain, tag: &str) -> Result<TaylorTrace> {
        let lengths = space.mesh().curve(tag)?.lengths();
        let traces = chain
            .fields
            .iter()
            .map(|f| f[1..].iter().map(|e| space.tangential_trace(tag, e)).collect())
            .collect::<Result<Vec<_>>>()?;
        Ok(TaylorTrace {
            tag: tag.to_string(),
            lengths,
            traces,
        })
    }

    pub fn order(&self) -> usize {
        self.traces.first().map_or(0, Vec::len)
    }

    pub fn num_waves(&self) -> usize {
        self.traces.len()
    }

    /// `Σ_{n=1}^{N} aⁿ/n! T⁽ⁿ⁾` for every wave.
    pub fn eval(&self, a: f64) -> Result<Vec<Vec<C64>>> {
        if !(a.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude {a} outside the expansion interval (-1, 1)"
            )));
        }
        Ok(self
            .traces
            .iter()
            .map(|tm| {
                let mut out = vec![Complex64::new(0.0, 0.0); self.lengths.len()];
                let mut coef = 1.0;
                for (n, t) in tm.iter().enumerate() {
                    coef *= a / (n + 1) as f64;
                    for (o, v) in out.iter_mut().zip(t) {
                        *o += v * coef;
                    }
                }
                out
            })
            .collect())
    }

    /// Largest ratio over waves of the last Taylor term to the first one
    /// at amplitude `a`.
    pub fn tail_ratio(&self, a: f64) -> f64 {
        let n = self.order();
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        self.traces
            .iter()
            .map(|tm| {
                let first = weighted_norm_sq(&tm[0], &self.lengths).sqrt() * a.abs();
                let last = weighted_norm_sq(&tm[n - 1], &self.lengths).sqrt() * a.abs().powi(n as i32) / fact;
                if first > 0.0 {
                    last / first
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Taylor traces for a support indicator with the truncation check: while
/// the last term exceeds `tail_tol` of the first at `a_bound`, the order is
/// raised (up to [`MAX_ORDER`]).
pub fn taylor_traces(
    bg: &BackgroundSolver,
    chi: &[f64],
    tag: &str,
    order: usize,
    a_bound: f64,
    tail_tol: f64,
) -> Result<TaylorTrace> {
    let mut chain = sensitivity_chain(bg, chi, order)?;
    loop {
        let n = chain.order();
        let tt = TaylorTrace::from_chain(bg.space(), &chain, tag)?;
        if n >= MAX_ORDER || n == 1 || tt.tail_ratio(a_bound) <= tail_tol {
            return Ok(tt);
        }
        debug!(
            "Taylor order {n} leaves a tail ratio {:.3e} at |a| = {a_bound}; raising the order",
            tt.tail_ratio(a_bound)
        );
        chain.extend(bg, chi, n + 1)?;
    }
}
