//! Vectors, sparse matrices, operators and small dense factorizations.

pub mod banded;
pub mod csr;
pub mod dense;
pub mod factor;
pub mod operator;
pub mod perm;

pub use banded::{BandedUpperTriangular, TriBand};
pub use csr::CsrMatrix;
pub use dense::{axpy, dot, norm2, DenseLu, Mat};
pub use factor::{hessenberg_lstsq, reduced_qr, reduced_qr_tol, Givens};
pub use operator::{AdjointOf, CsrOperator, DenseOperator, FnOperator, LinearOperator, MvCounter};
pub use perm::PermutationMap;

/// `y = A·x` without touching any counter.
pub fn spmv<T: crate::Scalar>(a: &CsrMatrix<T>, x: &[T]) -> Result<Vec<T>, crate::error::LinalgError> {
    a.spmv(x)
}
