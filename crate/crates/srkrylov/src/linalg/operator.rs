//! Abstract linear operators with shared matrix-vector counters.
//!
//! Every operator exposes a silent apply (used for monitoring true residuals) and
//! a counted apply. Wrappers that compose a base operator report the base
//! counter, so one wrapped application counts as one product with `A`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::LinalgError;
use crate::linalg::csr::CsrMatrix;
use crate::linalg::dense::{dot, Mat};
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default)]
pub struct MvCounter(Arc<AtomicUsize>);

impl MvCounter {
    pub fn new() -> Self {
        Self::default()
    }
    pub fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }
    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

pub trait LinearOperator<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn counter(&self) -> &MvCounter;
    /// Product without touching the counter.
    fn apply_silent(&self, x: &[T]) -> Vec<T>;
    fn adjoint_silent(&self, _x: &[T]) -> Option<Vec<T>> {
        None
    }
    fn has_adjoint(&self) -> bool {
        false
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.counter().bump();
        self.apply_silent(x)
    }

    fn apply_adjoint(&self, x: &[T]) -> Result<Vec<T>, LinalgError> {
        if !self.has_adjoint() {
            return Err(LinalgError::NoAdjoint);
        }
        self.counter().bump();
        self.adjoint_silent(x).ok_or(LinalgError::NoAdjoint)
    }

    fn mv_count(&self) -> usize {
        self.counter().get()
    }
}

impl<T: Scalar, O: LinearOperator<T> + ?Sized> LinearOperator<T> for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn counter(&self) -> &MvCounter {
        (**self).counter()
    }
    fn apply_silent(&self, x: &[T]) -> Vec<T> {
        (**self).apply_silent(x)
    }
    fn adjoint_silent(&self, x: &[T]) -> Option<Vec<T>> {
        (**self).adjoint_silent(x)
    }
    fn has_adjoint(&self) -> bool {
        (**self).has_adjoint()
    }
}

/// Counted operator backed by a borrowed CSR matrix.
pub struct CsrOperator<'a, T> {
    a: &'a CsrMatrix<T>,
    counter: MvCounter,
}

impl<'a, T: Scalar> CsrOperator<'a, T> {
    pub fn new(a: &'a CsrMatrix<T>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "operator must be square");
        CsrOperator { a, counter: MvCounter::new() }
    }
    pub fn with_counter(a: &'a CsrMatrix<T>, counter: MvCounter) -> Self {
        CsrOperator { a, counter }
    }
    pub fn matrix(&self) -> &CsrMatrix<T> {
        self.a
    }
}

impl<T: Scalar> LinearOperator<T> for CsrOperator<'_, T> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn counter(&self) -> &MvCounter {
        &self.counter
    }
    fn apply_silent(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.a.nrows()];
        self.a.spmv_into(x, &mut y);
        y
    }
    fn adjoint_silent(&self, x: &[T]) -> Option<Vec<T>> {
        self.a.spmv_adjoint(x).ok()
    }
    fn has_adjoint(&self) -> bool {
        true
    }
}

/// Dense operator, mostly for oracles and tiny constructed examples.
pub struct DenseOperator<T> {
    a: Mat<T>,
    counter: MvCounter,
}

impl<T: Scalar> DenseOperator<T> {
    pub fn new(a: Mat<T>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        DenseOperator { a, counter: MvCounter::new() }
    }
    pub fn matrix(&self) -> &Mat<T> {
        &self.a
    }
}

impl<T: Scalar> LinearOperator<T> for DenseOperator<T> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn counter(&self) -> &MvCounter {
        &self.counter
    }
    fn apply_silent(&self, x: &[T]) -> Vec<T> {
        self.a.mul_vec(x)
    }
    fn adjoint_silent(&self, x: &[T]) -> Option<Vec<T>> {
        Some(self.a.adj_mul_vec(x))
    }
    fn has_adjoint(&self) -> bool {
        true
    }
}

type VecFn<T> = Box<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// Operator from closures.
pub struct FnOperator<T> {
    dim: usize,
    f: VecFn<T>,
    fh: Option<VecFn<T>>,
    counter: MvCounter,
}

impl<T: Scalar> FnOperator<T> {
    pub fn new(dim: usize, f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        FnOperator { dim, f: Box::new(f), fh: None, counter: MvCounter::new() }
    }
    pub fn with_adjoint(mut self, fh: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.fh = Some(Box::new(fh));
        self
    }
}

impl<T: Scalar> LinearOperator<T> for FnOperator<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn counter(&self) -> &MvCounter {
        &self.counter
    }
    fn apply_silent(&self, x: &[T]) -> Vec<T> {
        (self.f)(x)
    }
    fn adjoint_silent(&self, x: &[T]) -> Option<Vec<T>> {
        self.fh.as_ref().map(|f| f(x))
    }
    fn has_adjoint(&self) -> bool {
        self.fh.is_some()
    }
}

/// `Aᴴ` viewed as an operator; its adjoint is `A`.
pub struct AdjointOf<O>(pub O);

impl<T: Scalar, O: LinearOperator<T>> LinearOperator<T> for AdjointOf<O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn counter(&self) -> &MvCounter {
        self.0.counter()
    }
    fn apply_silent(&self, x: &[T]) -> Vec<T> {
        self.0.adjoint_silent(x).expect("AdjointOf requires an operator with adjoint")
    }
    fn adjoint_silent(&self, x: &[T]) -> Option<Vec<T>> {
        Some(self.0.apply_silent(x))
    }
    fn has_adjoint(&self) -> bool {
        true
    }
}

/// Hermitian probe: `|xᴴ(Ay) − (Ax)ᴴy| / (‖x‖·‖Ay‖)`.
pub fn hermitian_defect<T: Scalar, O: LinearOperator<T> + ?Sized>(op: &O, x: &[T], y: &[T]) -> T::Real {
    let ay = op.apply_silent(y);
    let ax = op.apply_silent(x);
    let l = dot(x, &ay);
    let r = dot(&ax, y);
    let scale = crate::linalg::dense::norm2(x) * crate::linalg::dense::norm2(&ay);
    if scale == num_traits::Zero::zero() {
        return num_traits::Zero::zero();
    }
    (l - r).modulus() / scale
}
