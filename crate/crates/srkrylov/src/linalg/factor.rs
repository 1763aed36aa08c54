//! Small dense factorizations: reduced QR and Hessenberg least squares.

use crate::error::LinalgError;
use crate::linalg::dense::{axpy, dot, norm2, scale, Mat};
use crate::scalar::{breakdown_tol, Scalar};
use num_traits::{Float, One, Zero};

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// `R` has a real positive diagonal. A column whose norm after
/// orthogonalization drops below `1e−14·‖column‖` is reported as dependent.
pub fn reduced_qr<T: Scalar>(b: &Mat<T>) -> Result<(Mat<T>, Mat<T>), LinalgError> {
    reduced_qr_tol(b, breakdown_tol::<T::Real>())
}

/// [`reduced_qr`] with an explicit relative rank threshold.
pub fn reduced_qr_tol<T: Scalar>(b: &Mat<T>, tol: T::Real) -> Result<(Mat<T>, Mat<T>), LinalgError> {
    let (n, z) = (b.nrows(), b.ncols());
    let mut q = b.clone();
    let mut r = Mat::zeros(z, z);
    for j in 0..z {
        let orig = norm2(b.col(j));
        if orig == T::Real::zero() {
            return Err(LinalgError::RankDeficient { col: j });
        }
        let mut v = q.col(j).to_vec();
        for _pass in 0..2 {
            for i in 0..j {
                let h = dot(q.col(i), &v);
                axpy(-h, q.col(i), &mut v);
                r[(i, j)] += h;
            }
        }
        let nv = norm2(&v);
        if nv <= tol * orig {
            return Err(LinalgError::RankDeficient { col: j });
        }
        scale(T::from_real(T::Real::one() / nv), &mut v);
        r[(j, j)] = T::from_real(nv);
        q.set_col(j, &v);
    }
    debug_assert_eq!(q.nrows(), n);
    Ok((q, r))
}

/// Complex Givens rotation `G = [[c, s], [−s̄, c]]` with real `c`.
#[derive(Clone, Copy, Debug)]
pub struct Givens<T: Scalar> {
    pub c: T::Real,
    pub s: T,
}

impl<T: Scalar> Givens<T> {
    /// Rotation that maps `(a, b)` onto `(ρ, 0)`; returns `ρ` too.
    pub fn zeroing(a: T, b: T) -> (Self, T) {
        let (aa, ab) = (a.modulus(), b.modulus());
        if ab == T::Real::zero() {
            return (Givens { c: T::Real::one(), s: T::zero() }, a);
        }
        if aa == T::Real::zero() {
            return (Givens { c: T::Real::zero(), s: T::one() }, b);
        }
        let r = aa.hypot(ab);
        let phase = a * T::from_real(T::Real::one() / aa);
        let s = phase * b.conj() * T::from_real(T::Real::one() / r);
        (Givens { c: aa / r, s }, phase * T::from_real(r))
    }

    #[inline]
    pub fn apply(&self, x: T, y: T) -> (T, T) {
        let c = T::from_real(self.c);
        (c * x + self.s * y, -self.s.conj() * x + c * y)
    }
}

/// Least squares `min ‖H̄y − c‖₂` for an `(n+1)×n` upper Hessenberg `H̄`.
pub fn hessenberg_lstsq<T: Scalar>(h: &Mat<T>, c: &[T]) -> Result<(Vec<T>, T::Real), LinalgError> {
    let n = h.ncols();
    if h.nrows() != n + 1 {
        return Err(LinalgError::DimensionMismatch { expected: n + 1, found: h.nrows() });
    }
    if c.len() != n + 1 {
        return Err(LinalgError::DimensionMismatch { expected: n + 1, found: c.len() });
    }
    let mut r = h.clone();
    let mut g = c.to_vec();
    let scale_h = h.norm_fro().max(T::Real::min_positive_value());
    let tol = breakdown_tol::<T::Real>() * scale_h;
    for j in 0..n {
        let (rot, rho) = Givens::zeroing(r[(j, j)], r[(j + 1, j)]);
        r[(j, j)] = rho;
        r[(j + 1, j)] = T::zero();
        for k in j + 1..n {
            let (a, b) = rot.apply(r[(j, k)], r[(j + 1, k)]);
            r[(j, k)] = a;
            r[(j + 1, k)] = b;
        }
        let (a, b) = rot.apply(g[j], g[j + 1]);
        g[j] = a;
        g[j + 1] = b;
        if rho.modulus() <= tol {
            return Err(LinalgError::Breakdown { step: j, what: "hessenberg least squares" });
        }
    }
    let mut y = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = g[i];
        for k in i + 1..n {
            s -= r[(i, k)] * y[k];
        }
        y[i] = s / r[(i, i)];
    }
    Ok((y, g[n].modulus()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{rel_diff, DenseLu};
    use num_complex::Complex64;
    use rand::SeedableRng;

    #[test]
    fn qr_identity() {
        let (q, r) = reduced_qr(&Mat::<f64>::identity(2)).unwrap();
        assert_eq!(q, Mat::identity(2));
        assert_eq!(r, Mat::identity(2));
    }

    #[test]
    fn qr_single_column() {
        let (q, r) = reduced_qr(&Mat::from_cols(2, &[vec![3.0f64, 4.0]])).unwrap();
        assert!((q[(0, 0)] - 0.6).abs() < 1e-15 && (q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((r[(0, 0)] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn qr_random_complex_orthonormal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let b = Mat::<Complex64>::random(10, 3, &mut rng);
        let (q, r) = reduced_qr(&b).unwrap();
        let qq = q.adj_matmul(&q).sub_mat(&Mat::identity(3));
        assert!(qq.norm_fro() <= 1e-12 * 10.0);
        assert!(q.matmul(&r).sub_mat(&b).norm_fro() <= 1e-12 * b.norm_fro());
        for i in 0..3 {
            assert!(r[(i, i)].im == 0.0 && r[(i, i)].re > 0.0);
        }
    }

    #[test]
    fn qr_detects_rank_deficiency() {
        let b = Mat::from_cols(3, &[vec![1.0f64, 2.0, 3.0], vec![2.0, 4.0, 6.0]]);
        assert!(matches!(reduced_qr(&b), Err(LinalgError::RankDeficient { col: 1 })));
    }

    #[test]
    fn lstsq_trivial_cases() {
        let h = Mat::from_rows(&[&[1.0f64], &[0.0]]);
        let (y, res) = hessenberg_lstsq(&h, &[2.0, 0.0]).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-15 && res < 1e-15);
        let h = Mat::from_rows(&[&[1.0f64], &[1.0]]);
        let (y, res) = hessenberg_lstsq(&h, &[1.0, 0.0]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15);
        assert!((res - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lstsq_matches_normal_equations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mut h = Mat::<Complex64>::random(6, 5, &mut rng);
        for j in 0..5 {
            for i in j + 2..6 {
                h[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        let c = crate::linalg::dense::random_vec::<Complex64, _>(6, &mut rng);
        let (y, res) = hessenberg_lstsq(&h, &c).unwrap();
        let normal = DenseLu::new(&h.adj_matmul(&h)).unwrap().solve(&h.adj_mul_vec(&c));
        assert!(rel_diff(&y, &normal) < 1e-10);
        let resid = crate::linalg::dense::sub(&h.mul_vec(&y), &c);
        assert!((norm2(&resid) - res).abs() < 1e-12);
        assert!(norm2(&h.adj_mul_vec(&resid)) <= 1e-10 * norm2(&c));
    }

    #[test]
    fn lstsq_flags_singular_structure() {
        let h = Mat::from_rows(&[&[0.0f64, 1.0], &[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(hessenberg_lstsq(&h, &[1.0, 1.0, 1.0]), Err(LinalgError::Breakdown { .. })));
    }
}
