//! Dense vectors and small column-major matrices.

use crate::error::LinalgError;
use crate::scalar::{breakdown_tol, Scalar};
use num_traits::{Float, One, Zero};
use rand::Rng;

/// `xᴴy`
#[inline]
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.conj() * *b).sum()
}

pub fn norm2<T: Scalar>(x: &[T]) -> T::Real {
    // scaled accumulation avoids overflow for the large Krylov powers
    let mut scale = T::Real::zero();
    let mut ssq = T::Real::one();
    for v in x {
        for part in [v.re(), v.im()] {
            if part != T::Real::zero() {
                let a = part.abs();
                if scale < a {
                    ssq = T::Real::one() + ssq * (scale / a) * (scale / a);
                    scale = a;
                } else {
                    ssq += (a / scale) * (a / scale);
                }
            }
        }
    }
    scale * ssq.sqrt()
}

/// `y += a·x`
#[inline]
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

#[inline]
pub fn scale<T: Scalar>(a: T, x: &mut [T]) {
    for xi in x {
        *xi *= a;
    }
}

pub fn sub<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(a, b)| *a - *b).collect()
}

pub fn random_vec<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    (0..n).map(|_| T::sample_normal(rng)).collect()
}

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat { nrows, ncols, data: vec![T::zero(); nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "data length does not match shape");
        Mat { nrows, ncols, data }
    }

    /// Builds from row slices; handy in tests.
    pub fn from_rows(rows: &[&[T]]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut m = Self::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), ncols);
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn from_cols(nrows: usize, cols: &[Vec<T>]) -> Self {
        let mut data = Vec::with_capacity(nrows * cols.len());
        for c in cols {
            assert_eq!(c.len(), nrows);
            data.extend_from_slice(c);
        }
        Mat { nrows, ncols: cols.len(), data }
    }

    pub fn random<R: Rng + ?Sized>(nrows: usize, ncols: usize, rng: &mut R) -> Self {
        Mat { nrows, ncols, data: random_vec(nrows * ncols, rng) }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }
    pub fn set_col(&mut self, j: usize, v: &[T]) {
        self.col_mut(j).copy_from_slice(v);
    }
    pub fn push_col(&mut self, v: &[T]) {
        if self.ncols == 0 && self.nrows == 0 {
            self.nrows = v.len();
        }
        assert_eq!(v.len(), self.nrows);
        self.data.extend_from_slice(v);
        self.ncols += 1;
    }
    /// First `k` columns.
    pub fn leading_cols(&self, k: usize) -> Mat<T> {
        Mat { nrows: self.nrows, ncols: k, data: self.data[..k * self.nrows].to_vec() }
    }
    pub fn cols_range(&self, from: usize, to: usize) -> Mat<T> {
        Mat {
            nrows: self.nrows,
            ncols: to - from,
            data: self.data[from * self.nrows..to * self.nrows].to_vec(),
        }
    }

    /// `M·x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for (j, xj) in x.iter().enumerate() {
            if !xj.is_zero() {
                axpy(*xj, self.col(j), &mut y);
            }
        }
        y
    }

    /// `Mᴴ·x`
    pub fn adj_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols).map(|j| dot(self.col(j), x)).collect()
    }

    pub fn matmul(&self, b: &Mat<T>) -> Mat<T> {
        assert_eq!(self.ncols, b.nrows);
        let mut out = Mat::zeros(self.nrows, b.ncols);
        for j in 0..b.ncols {
            let c = self.mul_vec(b.col(j));
            out.set_col(j, &c);
        }
        out
    }

    /// `Mᴴ·B`
    pub fn adj_matmul(&self, b: &Mat<T>) -> Mat<T> {
        assert_eq!(self.nrows, b.nrows);
        let mut out = Mat::zeros(self.ncols, b.ncols);
        for j in 0..b.ncols {
            for i in 0..self.ncols {
                out[(i, j)] = dot(self.col(i), b.col(j));
            }
        }
        out
    }

    pub fn adjoint(&self) -> Mat<T> {
        let mut out = Mat::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn norm_fro(&self) -> T::Real {
        norm2(&self.data)
    }

    pub fn norm1(&self) -> T::Real {
        let mut best = T::Real::zero();
        for j in 0..self.ncols {
            let s = self.col(j).iter().fold(T::Real::zero(), |a, v| a + v.modulus());
            best = best.max(s);
        }
        best
    }

    pub fn sub_mat(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Mat { nrows: self.nrows, ncols: self.ncols, data: sub(&self.data, &other.data) }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}

/// LU with partial pivoting for small dense systems.
#[derive(Clone, Debug)]
pub struct DenseLu<T> {
    lu: Mat<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> DenseLu<T> {
    pub fn new(a: &Mat<T>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(LinalgError::DimensionMismatch { expected: n, found: a.ncols() });
        }
        let mut lu = a.clone();
        let mut piv = (0..n).collect::<Vec<_>>();
        let scale = a.norm1().max(T::Real::min_positive_value());
        let tol = breakdown_tol::<T::Real>() * scale;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].modulus();
            for i in k + 1..n {
                let v = lu[(i, k)].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tol {
                return Err(LinalgError::Singular { step: k });
            }
            if p != k {
                piv.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / d;
                lu[(i, k)] = l;
                if !l.is_zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= l * u;
                    }
                }
            }
        }
        Ok(DenseLu { lu, piv })
    }

    pub fn dim(&self) -> usize {
        self.piv.len()
    }

    /// `i`-th diagonal entry of the `U` factor.
    pub fn pivot(&self, i: usize) -> T {
        self.lu[(i, i)]
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x: Vec<T> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `Aᴴx = b`.
    pub fn solve_adjoint(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lu[(k, i)].conj() * y[k];
            }
            y[i] = s / self.lu[(i, i)].conj();
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lu[(k, i)].conj() * y[k];
            }
            y[i] = s;
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.piv.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

/// Relative agreement measure `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_diff<T: Scalar>(a: &[T], b: &[T]) -> T::Real {
    let nb = norm2(b);
    let d = norm2(&sub(a, b));
    if nb > T::Real::zero() {
        d / nb
    } else {
        d
    }
}

pub fn max_abs<T: Scalar>(x: &[T]) -> T::Real {
    x.iter().fold(T::Real::zero(), |a, v| a.max(v.modulus()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;

    #[test]
    fn dot_conjugates_first_argument() {
        let x = [Complex64::new(0.0, 1.0)];
        let y = [Complex64::new(0.0, 1.0)];
        assert_eq!(dot(&x, &y), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn norm_handles_huge_entries() {
        let x = [3e200f64, 4e200];
        assert!((norm2(&x) / 5e200 - 1.0).abs() < 1e-15);
        assert_eq!(norm2::<f64>(&[]), 0.0);
    }

    #[test]
    fn lu_solves_and_adjoint_solves() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = Mat::<Complex64>::random(6, 6, &mut rng);
        let lu = DenseLu::new(&a).unwrap();
        let b = random_vec::<Complex64, _>(6, &mut rng);
        let x = lu.solve(&b);
        assert!(rel_diff(&a.mul_vec(&x), &b) < 1e-12);
        let y = lu.solve_adjoint(&b);
        assert!(rel_diff(&a.adj_mul_vec(&y), &b) < 1e-12);
    }

    #[test]
    fn lu_flags_singular() {
        let a = Mat::<f64>::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(DenseLu::new(&a), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn adjoint_matmul_matches_explicit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let a = Mat::<f64>::random(5, 3, &mut rng);
        let b = Mat::<f64>::random(5, 2, &mut rng);
        let lhs = a.adj_matmul(&b);
        let rhs = a.adjoint().matmul(&b);
        assert!(lhs.sub_mat(&rhs).norm_fro() < 1e-14);
    }
}
