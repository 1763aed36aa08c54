use crate::error::Result;
use crate::linalg::{norm2, reduced_qr_tol, CsrMatrix, Mat};
use crate::scalar::Scalar;
use num_traits::{Float, One};

/// A matrix together with its right-hand-side block.
#[derive(Clone, Debug)]
pub struct ProblemInstance<T: Scalar> {
    pub a: CsrMatrix<T>,
    pub rhs_set: Mat<T>,
    pub label: String,
    pub cond_estimate: Option<f64>,
}

/// Reverse Krylov block `[b, A⁻¹b, …, A⁻ᶻb]` orthonormalized by reduced QR.
///
/// `solve` applies `A⁻¹`. Each column is normalized before the next solve so
/// the powers neither overflow nor underflow. A column counts as dependent
/// only when its new direction is below machine epsilon: deep reverse Krylov
/// blocks of smooth operators legitimately shrink to ~1e−15.
pub fn gen_rhs_sequence<T: Scalar>(
    mut solve: impl FnMut(&[T]) -> Result<Vec<T>>,
    b: &[T],
    z: usize,
) -> Result<Mat<T>> {
    let mut blk = Mat::zeros(b.len(), 0);
    let mut cur = b.to_vec();
    for i in 0..=z {
        if i > 0 {
            cur = solve(&cur)?;
        }
        let nrm = norm2(&cur);
        if nrm > T::Real::min_positive_value() {
            let inv = T::from_real(T::Real::one() / nrm);
            cur.iter_mut().for_each(|v| *v *= inv);
        }
        blk.push_col(&cur);
    }
    let (q, _) = reduced_qr_tol(&blk, T::Real::epsilon())?;
    Ok(q)
}
