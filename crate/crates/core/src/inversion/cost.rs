//! Linearized misfit `J(D, a) = ½ Σ_m ‖δ_m − Σ aⁿ/n! T_m⁽ⁿ⁾‖²`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fem::C64;
use crate::forward::{weighted_norm_sq, TraceData};
use crate::sensitivity::TaylorTrace;

use super::optimize::{golden_section, GoldenResult};

fn check(data: &TraceData, tt: &TaylorTrace) -> Result<()> {
    if data.tag != tt.tag || data.lengths.len() != tt.lengths.len() || data.num_waves() != tt.num_waves() {
        return Err(Error::DimensionMismatch(format!(
            "data on '{}' ({} points, {} waves) vs Taylor traces on '{}' ({} points, {} waves)",
            data.tag,
            data.lengths.len(),
            data.num_waves(),
            tt.tag,
            tt.lengths.len(),
            tt.num_waves()
        )));
    }
    Ok(())
}

/// Direct evaluation from the Taylor sum.
pub fn cost_j(data: &TraceData, tt: &TaylorTrace, a: f64) -> Result<f64> {
    check(data, tt)?;
    let model = tt.eval(a)?;
    let mut j = 0.0;
    for (d, m) in data.waves.iter().zip(&model) {
        let r: Vec<C64> = d.iter().zip(m).map(|(x, y)| x - y).collect();
        j += weighted_norm_sq(&r, &data.lengths);
    }
    Ok(0.5 * j)
}

/// `J` as a polynomial of degree `2N` in `a`, built from the Gram matrix
/// of `{δ, T⁽¹⁾/1!, …, T⁽ᴺ⁾/N!}` summed over waves.
#[derive(Clone, Debug, PartialEq)]
pub struct CostPolynomial {
    /// `J(a) = Σ_k coeffs[k]·aᵏ`.
    pub coeffs: Vec<f64>,
}

impl CostPolynomial {
    pub fn new(data: &TraceData, tt: &TaylorTrace) -> Result<CostPolynomial> {
        check(data, tt)?;
        let n = tt.order();
        let mut gram = vec![vec![Complex64::new(0.0, 0.0); n + 1]; n + 1];
        let w = &data.lengths;
        for (d, ts) in data.waves.iter().zip(&tt.traces) {
            let mut vs: Vec<Vec<C64>> = Vec::with_capacity(n + 1);
            vs.push(d.iter().map(|v| -v).collect());
            let mut fact = 1.0;
            for (k, t) in ts.iter().enumerate() {
                fact *= (k + 1) as f64;
                vs.push(t.iter().map(|v| v / fact).collect());
            }
            for i in 0..=n {
                for j in 0..=n {
                    gram[i][j] += vs[i]
                        .iter()
                        .zip(&vs[j])
                        .zip(w)
                        .map(|((x, y), l)| x.conj() * y * l)
                        .sum::<C64>();
                }
            }
        }
        // ‖Σ_i aⁱ v_i‖² with v_0 = −δ
        let mut coeffs = vec![0.0; 2 * n + 1];
        for (i, row) in gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                coeffs[i + j] += 0.5 * g.re;
            }
        }
        Ok(CostPolynomial { coeffs })
    }

    pub fn eval(&self, a: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * a + c)
    }

    /// `J(0)`: half the data energy.
    pub fn data_term(&self) -> f64 {
        self.coeffs[0]
    }
}

/// Golden section of `a ↦ J(D, a)` over `[−a_max, a_max]`.
pub fn amplitude_opt(poly: &CostPolynomial, a_max: f64, tol: f64) -> Result<GoldenResult> {
    golden_section(|a| Ok(poly.eval(a)), -a_max, a_max, tol)
}
