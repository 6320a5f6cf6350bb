use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex sparse matrix in compressed-row storage with sorted, unique
/// column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseComplexMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: Complex64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseComplexMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseComplexMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseComplexMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.add(i, i, Complex64::new(1.0, 0.0));
        }
        b.build()
    }

    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        entries: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Self {
        let mut b = TripletBuilder::new(nrows, ncols);
        for (r, c, v) in entries {
            b.add(r, c, v);
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over the stored entries of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension");
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Computes `Aᴴ x`.
    pub fn adjoint_matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.nrows, "adjoint matvec dimension");
        let mut y = vec![Complex64::new(0.0, 0.0); self.ncols];
        for (r, c, v) in self.iter() {
            y[c] += v.conj() * x[r];
        }
        y
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.iter().map(|(r, c, v)| (c, r, v)))
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Returns `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        Ok(Self::from_triplets(
            self.nrows,
            self.ncols,
            self.iter()
                .map(|(r, c, v)| (r, c, a * v))
                .chain(other.iter().map(|(r, c, v)| (r, c, b * v))),
        ))
    }

    /// Largest entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
            .map(|d| d.values.iter().map(|v| v.norm()).fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Dense row-major copy; test and debugging use only.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::new(0.0, 0.0); self.ncols]; self.nrows];
        for (r, c, v) in self.iter() {
            d[r][c] = v;
        }
        d
    }

    /// Sesquilinear form `yᴴ A x`.
    pub fn form(&self, y: &[Complex64], x: &[Complex64]) -> Complex64 {
        let ax = self.matvec(x);
        y.iter().zip(&ax).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Sparse product `A·B`.
pub fn matmul(a: &SparseComplexMatrix, b: &SparseComplexMatrix) -> Result<SparseComplexMatrix> {
    if a.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "product of {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut t = TripletBuilder::new(a.nrows(), b.ncols());
    for (r, k, v) in a.iter() {
        for (c, w) in b.row(k) {
            t.add(r, c, v * w);
        }
    }
    Ok(t.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseComplexMatrix::from_triplets(
            2,
            2,
            [(0, 1, c(1.0, 0.0)), (0, 1, c(0.0, 2.0)), (1, 0, c(3.0, 0.0))],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), c(1.0, 2.0));
        assert_eq!(m.get(1, 1), c(0.0, 0.0));
    }

    #[test]
    fn adjoint_matches_transpose_conj() {
        let m = SparseComplexMatrix::from_triplets(
            2,
            3,
            [(0, 0, c(1.0, 1.0)), (0, 2, c(2.0, -1.0)), (1, 1, c(0.5, 0.0))],
        );
        let x = vec![c(1.0, 2.0), c(-1.0, 0.5)];
        let y1 = m.adjoint_matvec(&x);
        let mt = m.transpose();
        let xc: Vec<_> = x.iter().map(|v| v.conj()).collect();
        let y2: Vec<_> = mt.matvec(&xc).iter().map(|v| v.conj()).collect();
        assert_eq!(y1, y2);
    }
}
