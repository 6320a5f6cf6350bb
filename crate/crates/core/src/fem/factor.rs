//! Reusable sparse LU factorization of complex square matrices.

use std::cell::Cell;
use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use super::sparse::SparseComplexMatrix;
use crate::error::{Error, Result};

thread_local! {
    static FACTORIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of factorizations built on the current thread so far.
pub fn factorization_count() -> usize {
    FACTORIZATIONS.with(|c| c.get())
}

static SEQUENTIAL: Once = Once::new();

/// LU factorization with partial pivoting. Immutable once built; `solve`
/// may be called concurrently.
pub struct Factorization {
    dim: usize,
    lu: Lu<usize, Complex64>,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization").field("dim", &self.dim).finish()
    }
}

impl Factorization {
    pub fn new(a: &SparseComplexMatrix) -> Result<Factorization> {
        // bitwise-reproducible results need faer's internal kernels to run
        // sequentially; parallelism is applied over right-hand sides instead
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "cannot factorize a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let triplets: Vec<Triplet<usize, usize, Complex64>> =
            a.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::FactorizationFailure {
                reason: format!("matrix assembly: {e:?}"),
            })?;
        let lu = mat.sp_lu().map_err(|e| Error::FactorizationFailure {
            reason: format!("{e:?}"),
        })?;
        FACTORIZATIONS.with(|c| c.set(c.get() + 1));
        let f = Factorization { dim: n, lu };
        f.probe(a)?;
        Ok(f)
    }

    /// Solves against a fixed vector and checks the residual. A zero pivot
    /// does not make faer fail; it shows up as non-finite entries here.
    fn probe(&self, a: &SparseComplexMatrix) -> Result<()> {
        if self.dim == 0 {
            return Ok(());
        }
        let b: Vec<Complex64> = (0..self.dim)
            .map(|i| Complex64::new(1.0 + (i % 7) as f64 * 0.125, ((i % 5) as f64 - 2.0) * 0.25))
            .collect();
        let x = self.solve(&b);
        if let Some(i) = x.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::FactorizationFailure {
                reason: format!("numerically singular: non-finite solution component {i} (zero pivot)"),
            });
        }
        let ax = a.matvec(&x);
        let num: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if num > 1e-6 * den {
            return Err(Error::FactorizationFailure {
                reason: format!("numerically singular: probe residual {:.3e}", num / den),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(rhs.len(), self.dim, "right-hand side dimension");
        let mut m = Mat::<Complex64>::from_fn(self.dim, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(m.as_mut());
        (0..self.dim).map(|i| m[(i, 0)]).collect()
    }

    /// Independent solves, run in parallel. Each result is identical to
    /// what `solve` returns for the same right-hand side.
    pub fn solve_many(&self, rhs: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        rhs.par_iter().map(|b| self.solve(b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_solve_returns_input() {
        let f = Factorization::new(&SparseComplexMatrix::identity(5)).unwrap();
        let b: Vec<_> = (0..5).map(|i| c(i as f64, -(i as f64))).collect();
        assert_eq!(f.solve(&b), b);
    }

    fn random_matrix(n: usize, seed: u64) -> SparseComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c(4.0 + rng.random::<f64>(), rng.random::<f64>())));
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                t.push((i, j, c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
            }
        }
        SparseComplexMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn random_system_residual() {
        let a = random_matrix(50, 3);
        let f = Factorization::new(&a).unwrap();
        let b: Vec<_> = (0..50).map(|i| c((i as f64).sin(), (i as f64).cos())).collect();
        let x = f.solve(&b);
        let r = a.matvec(&x);
        let num: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den <= 1e-10, "{}", num / den);
    }

    #[test]
    fn duplicate_row_is_singular() {
        let a = SparseComplexMatrix::from_triplets(
            3,
            3,
            [
                (0, 0, c(1.0, 0.0)),
                (0, 1, c(2.0, 1.0)),
                (1, 0, c(1.0, 0.0)),
                (1, 1, c(2.0, 1.0)),
                (2, 2, c(1.0, 0.0)),
            ],
        );
        assert!(matches!(
            Factorization::new(&a),
            Err(Error::FactorizationFailure { .. })
        ));
    }

    #[test]
    fn batched_equals_single() {
        let a = random_matrix(40, 11);
        let f = Factorization::new(&a).unwrap();
        let rhs: Vec<Vec<_>> = (0..8)
            .map(|k| (0..40).map(|i| c((i * k) as f64 * 0.1, k as f64)).collect())
            .collect();
        let batch = f.solve_many(&rhs);
        for (b, x) in rhs.iter().zip(&batch) {
            assert_eq!(&f.solve(b), x);
        }
    }

    #[test]
    fn counter_tracks_factorizations() {
        let before = factorization_count();
        let _f = Factorization::new(&SparseComplexMatrix::identity(3)).unwrap();
        assert_eq!(factorization_count(), before + 1);
    }
}
