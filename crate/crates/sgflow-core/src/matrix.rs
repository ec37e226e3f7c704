//! Dense square matrices on the solver time grid.
//!
//! Kernels are a few hundred steps square at most, so a plain row-major
//! `Vec<f64>` beats pulling in a linear-algebra stack; everything the
//! solvers need is row access and elementwise arithmetic.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            m.row_mut(i).copy_from_slice(row);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Borrow all rows before `i` immutably together with row `i` mutably.
    #[inline]
    pub fn rows_split_mut(&mut self, i: usize) -> (&[f64], &mut [f64]) {
        let n = self.n;
        let (past, rest) = self.data.split_at_mut(i * n);
        (past, &mut rest[..n])
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// self <- self + alpha * (other - self), entrywise.
    pub fn mix_from(&mut self, other: &SquareMatrix, alpha: f64) {
        assert_eq!(self.n, other.n);
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += alpha * (b - *a);
        }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Copy the lower triangle (including the diagonal) onto the upper one.
    pub fn mirror_lower(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                let v = self[(i, j)];
                self[(j, i)] = v;
            }
        }
    }
}

impl core::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for SquareMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Dot product of two equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// acc <- acc + scale * v, elementwise.
#[inline]
pub fn axpy(acc: &mut [f64], scale: f64, v: &[f64]) {
    debug_assert_eq!(acc.len(), v.len());
    for (a, &x) in acc.iter_mut().zip(v) {
        *a += scale * x;
    }
}
