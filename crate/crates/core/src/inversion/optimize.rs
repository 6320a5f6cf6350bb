//! Derivative-free minimizers: golden section in 1D, Powell's direction set
//! method in several variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(√5 − 1)/2`.
pub const RHO: f64 = 0.618_033_988_749_894_9;

fn finite(v: f64, what: &str, x: &dyn std::fmt::Debug) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{what} returned {v} at {x:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldenResult {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
    /// Final bracket.
    pub lo: f64,
    pub hi: f64,
}

/// Shrinks `[lo, hi]` by the golden ratio until it is narrower than `tol`
/// and returns the midpoint of the final bracket.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<GoldenResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "golden section needs lo < hi and tol > 0, got [{lo}, {hi}], tol {tol}"
        )));
    }
    let mut eval = |x: f64, n: &mut usize| -> Result<f64> {
        *n += 1;
        finite(f(x)?, "golden section objective", &x)
    };
    let mut n = 0;
    let (mut a, mut b) = (lo, hi);
    if b - a >= tol {
        let mut c = b - RHO * (b - a);
        let mut d = a + RHO * (b - a);
        let mut fc = eval(c, &mut n)?;
        let mut fd = eval(d, &mut n)?;
        loop {
            // the interior point created by the last shrink is never needed
            if fc <= fd {
                b = d;
                if b - a < tol {
                    break;
                }
                (d, fd) = (c, fc);
                c = b - RHO * (b - a);
                fc = eval(c, &mut n)?;
            } else {
                a = c;
                if b - a < tol {
                    break;
                }
                (c, fc) = (d, fd);
                d = a + RHO * (b - a);
                fd = eval(d, &mut n)?;
            }
        }
    }
    let x = 0.5 * (a + b);
    let value = eval(x, &mut n)?;
    Ok(GoldenResult {
        x,
        value,
        evaluations: n,
        lo: a,
        hi: b,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowellConfig {
    pub ftol: f64,
    pub max_iter: usize,
    /// Absolute tolerance of each line search, in units of the direction.
    pub line_tol: f64,
    /// Maximal number of bracket expansions per line search.
    pub max_expand: usize,
}

impl Default for PowellConfig {
    fn default() -> Self {
        PowellConfig {
            ftol: 1e-6,
            max_iter: 100,
            line_tol: 1e-4,
            max_expand: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowellResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Best value before the first and after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub line_searches: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Objective<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Objective<F> {
    fn at(&mut self, x: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        finite((self.f)(x)?, "Powell objective", &x)
    }

    /// Minimizes `t ↦ f(x + t·u)` and moves `x`; never accepts an increase.
    fn line_min(&mut self, x: &mut [f64], fx: f64, u: &[f64], cfg: &PowellConfig) -> Result<f64> {
        let point = |t: f64| -> Vec<f64> { x.iter().zip(u).map(|(a, b)| a + t * b).collect() };
        let g = |obj: &mut Self, t: f64| obj.at(&point(t));
        // bracket a minimum: f(a) >= f(b) <= f(c)
        let grow = 1.0 / RHO;
        let (mut a, mut fa) = (0.0, fx);
        let (mut b, mut fb) = (1.0, g(self, 1.0)?);
        if fb > fa {
            let fm = g(self, -1.0)?;
            if fm >= fa {
                // minimum inside [-1, 1]
                let (lo, hi) = (-1.0, 1.0);
                return self.finish(x, fx, u, lo, hi, cfg);
            }
            (a, fa, b, fb) = (1.0, fb, -1.0, fm);
            let _ = fa;
        }
        let mut c = b + grow * (b - a);
        let mut fc = g(self, c)?;
        let mut expansions = 0;
        while fc < fb && expansions < cfg.max_expand {
            (a, b, fb) = (b, c, fc);
            c = b + grow * (b - a);
            fc = g(self, c)?;
            expansions += 1;
        }
        let (lo, hi) = if a < c { (a, c) } else { (c, a) };
        self.finish(x, fx, u, lo, hi, cfg)
    }

    fn finish(&mut self, x: &mut [f64], fx: f64, u: &[f64], lo: f64, hi: f64, cfg: &PowellConfig) -> Result<f64> {
        let base = x.to_vec();
        let point = |t: f64| -> Vec<f64> { base.iter().zip(u).map(|(a, b)| a + t * b).collect() };
        let r = golden_section(|t| self.at(&point(t)), lo, hi, cfg.line_tol)?;
        if r.value < fx {
            x.copy_from_slice(&point(r.x));
            Ok(r.value)
        } else {
            Ok(fx)
        }
    }
}

/// Powell's method started from coordinate directions scaled by `step0`.
pub fn powell_minimize<F>(f: F, x0: &[f64], step0: &[f64], cfg: &PowellConfig) -> Result<PowellResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    if n == 0 || step0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "Powell: {} variables, {} initial steps",
            n,
            step0.len()
        )));
    }
    let mut obj = Objective { f, evaluations: 0 };
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = step0[i];
            d
        })
        .collect();
    let mut x = x0.to_vec();
    let mut fx = obj.at(&x)?;
    let mut trace = vec![fx];
    let mut line_searches = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let (x_start, f_start) = (x.clone(), fx);
        let (mut biggest, mut i_big) = (0.0, 0);
        for (i, u) in dirs.iter().enumerate() {
            let before = fx;
            fx = obj.line_min(&mut x, fx, u, cfg)?;
            line_searches += 1;
            if before - fx > biggest {
                biggest = before - fx;
                i_big = i;
            }
        }
        let tiny = 1e-25;
        if 2.0 * (f_start - fx) <= cfg.ftol * (f_start.abs() + fx.abs()) + tiny {
            trace.push(fx);
            converged = true;
            break;
        }
        let u_new: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let extrapolated: Vec<f64> = x.iter().zip(&u_new).map(|(a, b)| a + b).collect();
        let fe = obj.at(&extrapolated)?;
        if fe < f_start {
            let t = 2.0 * (f_start - 2.0 * fx + fe) * (f_start - fx - biggest).powi(2)
                - biggest * (f_start - fe).powi(2);
            if t < 0.0 {
                fx = obj.line_min(&mut x, fx, &u_new, cfg)?;
                line_searches += 1;
                dirs.remove(i_big);
                dirs.push(u_new);
            }
        }
        trace.push(fx);
    }
    Ok(PowellResult {
        x,
        value: fx,
        trace,
        iterations,
        line_searches,
        evaluations: obj.evaluations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_quadratic() {
        let r = golden_section(|x| Ok((x - 0.3) * (x - 0.3)), -1.0, 1.0, 1e-6).unwrap();
        assert!((r.x - 0.3).abs() <= 1e-6);
        assert!(r.hi - r.lo < 1e-6 && r.lo <= 0.3 && 0.3 <= r.hi);
    }

    #[test]
    fn golden_boundary_minimum() {
        let r = golden_section(|x| Ok(x), 0.0, 1.0, 1e-6).unwrap();
        assert!(r.x < 1e-6);
    }

    #[test]
    fn golden_evaluation_count() {
        for (lo, hi, tol) in [(-1.0, 1.0, 1e-6), (0.0, 3.0, 1e-3), (-0.99, 0.99, 1e-5)] {
            let r = golden_section(|x: f64| Ok(x.cos()), lo, hi, tol).unwrap();
            let bound = (((hi - lo) / tol).ln() / (1.0 / RHO).ln()).ceil() as usize + 2;
            assert!(r.evaluations <= bound, "{} > {bound}", r.evaluations);
        }
    }

    #[test]
    fn golden_rejects_nan() {
        let r = golden_section(|x| Ok(if x > 0.5 { f64::NAN } else { x }), 0.0, 1.0, 1e-3);
        assert!(matches!(r, Err(Error::NonFinite(_))));
        assert!(golden_section(|x| Ok(x), 1.0, 0.0, 1e-3).is_err());
    }

    #[test]
    fn powell_separable_quadratic() {
        let f = |x: &[f64]| Ok((x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2));
        let r = powell_minimize(f, &[0.0, 0.0], &[0.1, 0.1], &PowellConfig::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] + 2.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn powell_rosenbrock() {
        let f = |x: &[f64]| Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let cfg = PowellConfig {
            ftol: 1e-12,
            max_iter: 200,
            line_tol: 1e-8,
            ..PowellConfig::default()
        };
        let r = powell_minimize(f, &[-1.2, 1.0], &[0.1, 0.1], &cfg).unwrap();
        assert!(r.iterations <= 200);
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?} {}", r.x, r.iterations);
        for w in r.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn powell_coupled_quadratic_line_search_budget() {
        // 3 variables, n(n+2) = 15 line searches: three iterations use at most 12
        let f = |x: &[f64]| {
            let (a, b, c) = (x[0] - 1.0, x[1] + 0.5, x[2] - 2.0);
            Ok(4.0 * a * a + 3.0 * b * b + 2.0 * c * c + 2.0 * a * b + b * c - a * c)
        };
        let cfg = PowellConfig {
            ftol: 1e-14,
            line_tol: 1e-11,
            max_iter: 3,
            ..PowellConfig::default()
        };
        let r = powell_minimize(f, &[0.0; 3], &[1.0; 3], &cfg).unwrap();
        assert!(r.line_searches <= 15, "{}", r.line_searches);
        let err = (r.x[0] - 1.0).abs().max((r.x[1] + 0.5).abs()).max((r.x[2] - 2.0).abs());
        assert!(err < 1e-8, "{err} {:?}", r.x);
    }

    #[test]
    fn powell_trace_is_monotone_and_aborts_on_nan() {
        let f = |x: &[f64]| Ok((x[0] * 3.0).sin() + 0.1 * x[0] * x[0] + (x[1] - 0.2).abs());
        let r = powell_minimize(f, &[2.0, 1.0], &[0.5, 0.5], &PowellConfig::default()).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let g = |x: &[f64]| Ok(if x[0] > 0.5 { f64::INFINITY } else { -x[0] });
        assert!(matches!(
            powell_minimize(g, &[0.0], &[1.0], &PowellConfig::default()),
            Err(Error::NonFinite(_))
        ));
    }
}
