use crate::error::LinalgError;
use crate::linalg::dense::Mat;
use crate::scalar::{breakdown_tol, Scalar};
use num_traits::{Float, One, Zero};

/// Upper triangular matrix with `upper_bandwidth` stored superdiagonals.
///
/// Column `j` keeps rows `j − ub ..= j` contiguously; rows above the band
/// (and below the diagonal) are structural zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedUpperTriangular<T> {
    n: usize,
    ub: usize,
    entries: Vec<T>,
}

impl<T: Scalar> BandedUpperTriangular<T> {
    pub fn zeros(n: usize, upper_bandwidth: usize) -> Self {
        let ub = upper_bandwidth.min(n.saturating_sub(1));
        BandedUpperTriangular { n, ub, entries: vec![T::zero(); n * (ub + 1)] }
    }

    pub fn from_entries(n: usize, upper_bandwidth: usize, entries: Vec<T>) -> Result<Self, LinalgError> {
        if entries.len() != n * (upper_bandwidth + 1) {
            return Err(LinalgError::Invalid("band storage has wrong length".into()));
        }
        Ok(BandedUpperTriangular { n, ub: upper_bandwidth, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn upper_bandwidth(&self) -> usize {
        self.ub
    }
    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i > j || j - i > self.ub {
            None
        } else {
            Some(j * (self.ub + 1) + self.ub + i - j)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |k| self.entries[k])
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.slot(i, j).unwrap_or_else(|| panic!("({i},{j}) outside band {}", self.ub));
        self.entries[k] = v;
    }

    /// Rows `lo..=j` that are stored for column `j`.
    pub fn col_range(&self, j: usize) -> std::ops::RangeInclusive<usize> {
        j.saturating_sub(self.ub)..=j
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for j in 0..self.n {
            for i in self.col_range(j) {
                y[i] += self.get(i, j) * x[j];
            }
        }
        y
    }

    fn check_diag(&self) -> Result<(), LinalgError> {
        let scale = self
            .entries
            .iter()
            .fold(T::Real::zero(), |a, v| a.max(v.modulus()))
            .max(T::Real::min_positive_value());
        let tol = breakdown_tol::<T::Real>() * scale;
        for i in 0..self.n {
            if self.get(i, i).modulus() <= tol {
                return Err(LinalgError::Singular { step: i });
            }
        }
        Ok(())
    }

    /// Back substitution for `K·y = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        self.check_diag()?;
        let mut y = b.to_vec();
        for j in (0..self.n).rev() {
            let yj = y[j] / self.get(j, j);
            y[j] = yj;
            for i in j.saturating_sub(self.ub)..j {
                let k = self.get(i, j);
                y[i] -= k * yj;
            }
        }
        Ok(y)
    }

    /// Forward substitution for `Kᴴ·y = b`.
    pub fn solve_adjoint(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        self.check_diag()?;
        let mut y = b.to_vec();
        for j in 0..self.n {
            let mut s = y[j];
            for i in j.saturating_sub(self.ub)..j {
                s -= self.get(i, j).conj() * y[i];
            }
            y[j] = s / self.get(j, j).conj();
        }
        Ok(y)
    }

    pub fn to_dense(&self) -> Mat<T> {
        let mut m = Mat::zeros(self.n, self.n);
        for j in 0..self.n {
            for i in self.col_range(j) {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// Largest `j − i` over nonzero stored entries.
    pub fn effective_bandwidth(&self) -> usize {
        let mut b = 0;
        for j in 0..self.n {
            for i in self.col_range(j) {
                if !self.get(i, j).is_zero() {
                    b = b.max(j - i);
                }
            }
        }
        b
    }
}

/// Tridiagonal Hessenberg band `T̄` with `n` columns.
///
/// `sub[j] = T(j+1, j)` (the last entry couples to the next basis vector) and
/// `sup[j] = T(j, j+1)`; `sup` may carry one extra coupling entry so that the
/// adjoint recursion `T̲ᴴ` can be formed as well.
#[derive(Clone, Debug, PartialEq)]
pub struct TriBand<T> {
    pub diag: Vec<T>,
    pub sub: Vec<T>,
    pub sup: Vec<T>,
}

impl<T: Scalar> TriBand<T> {
    pub fn new() -> Self {
        TriBand { diag: Vec::new(), sub: Vec::new(), sup: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if i == j && j < self.diag.len() {
            self.diag[j]
        } else if i == j + 1 && j < self.sub.len() {
            self.sub[j]
        } else if j == i + 1 && i < self.sup.len() {
            self.sup[i]
        } else {
            T::zero()
        }
    }

    /// Square `n×n` part times `x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let n = self.n();
        let mut y = vec![T::zero(); n];
        for j in 0..n {
            y[j] += self.diag[j] * x[j];
            if j + 1 < n {
                y[j + 1] += self.sub[j] * x[j];
                y[j] += self.sup[j] * x[j + 1];
            }
        }
        y
    }

    pub fn square_dense(&self) -> Mat<T> {
        let n = self.n();
        let mut m = Mat::zeros(n, n);
        for j in 0..n {
            for i in j.saturating_sub(1)..(j + 2).min(n) {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// `(n+1)×n` matrix including the coupling row.
    pub fn bar_dense(&self) -> Mat<T> {
        let n = self.n();
        let mut m = Mat::zeros(n + 1, n);
        for j in 0..n {
            for i in j.saturating_sub(1)..(j + 2) {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// Band of `T̲ᴴ`: the recursion matrix of the left (adjoint) basis.
    pub fn adjoint_band(&self) -> TriBand<T> {
        TriBand {
            diag: self.diag.iter().map(|v| v.conj()).collect(),
            sub: self.sup.iter().map(|v| v.conj()).collect(),
            sup: self.sub.iter().map(|v| v.conj()).collect(),
        }
    }

    /// Diagonal block for columns `from..to`; its coupling row is `T(to, to−1)`.
    pub fn block(&self, from: usize, to: usize) -> TriBand<T> {
        TriBand {
            diag: self.diag[from..to].to_vec(),
            sub: self.sub[from..to.min(self.sub.len())].to_vec(),
            sup: self.sup[from..to.min(self.sup.len())].to_vec(),
        }
    }

    /// First `n` columns.
    pub fn truncate(&self, n: usize) -> TriBand<T> {
        self.block(0, n)
    }

    pub fn is_hermitian(&self, tol: T::Real) -> bool {
        let n = self.n();
        self.diag.iter().all(|d| d.im().abs() <= tol * d.modulus().max(T::Real::one()))
            && (0..n.saturating_sub(1)).all(|j| (self.sub[j] - self.sup[j].conj()).modulus() <= tol * self.sub[j].modulus().max(T::Real::one()))
    }
}

impl<T: Scalar> Default for TriBand<T> {
    fn default() -> Self {
        Self::new()
    }
}
