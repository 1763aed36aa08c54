use crate::error::{LinalgError, Result};
use crate::linalg::{axpy, dot, norm2, LinearOperator, Mat};
use crate::scalar::{breakdown_tol, RealScalar, Scalar};
use num_traits::{One, Zero};

use super::report::{Recorder, SolveReport};

/// Recycling GCR: project onto the stored image basis, then extend it.
///
/// Requires `A·U = V` and `VᴴV = I` on entry; both hold for the returned pair.
pub fn rgcr_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    u: Mat<T>,
    v: Mat<T>,
    b: &[T],
    tol: f64,
    maxit: usize,
) -> Result<(Mat<T>, Mat<T>, SolveReport<T>)> {
    let n = b.len();
    if u.ncols() != v.ncols() || (u.ncols() > 0 && (u.nrows() != n || v.nrows() != n)) {
        return Err(LinalgError::Invalid("U and V must be N×m with equal m".into()).into());
    }
    let (mut u, mut v) = if u.ncols() == 0 { (Mat::zeros(n, 0), Mat::zeros(n, 0)) } else { (u, v) };
    if v.ncols() > 0 {
        let g = v.adj_matmul(&v);
        let defect = g.sub_mat(&Mat::identity(v.ncols())).norm_fro().to_f64();
        if defect > 1e-8 {
            return Err(LinalgError::Invalid(format!("VᴴV deviates from I by {defect:e}")).into());
        }
    }
    let mut rec = Recorder::new(a, b);
    let bnorm = norm2(b);
    let thresh = crate::scalar::real::<T>(tol) * bnorm;
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let m0 = v.ncols();
    if m0 > 0 {
        let om = v.adj_mul_vec(&r);
        x = u.mul_vec(&om);
        let vom = v.mul_vec(&om);
        axpy(-T::one(), &vom, &mut r);
        rec.record(&x);
    }
    let mut notes = Vec::new();
    let mut it = 0;
    while norm2(&r) > thresh && it < maxit {
        let mut uu = r.clone();
        let mut vv = a.apply(&uu);
        let vnorm0 = norm2(&vv);
        for _pass in 0..2 {
            let gam = v.adj_mul_vec(&vv);
            axpy(-T::one(), &u.mul_vec(&gam), &mut uu);
            axpy(-T::one(), &v.mul_vec(&gam), &mut vv);
        }
        let l = norm2(&vv);
        if l <= breakdown_tol::<T::Real>() * vnorm0 || l == T::Real::zero() {
            notes.push(format!("stagnation at iteration {it}"));
            break;
        }
        let inv = T::from_real(T::Real::one() / l);
        uu.iter_mut().for_each(|e| *e *= inv);
        vv.iter_mut().for_each(|e| *e *= inv);
        let om = dot(&vv, &r);
        axpy(om, &uu, &mut x);
        axpy(-om, &vv, &mut r);
        u.push_col(&uu);
        v.push_col(&vv);
        rec.record(&x);
        it += 1;
    }
    let added = v.ncols() - m0;
    let mut rep = rec.finish("rgcr".into(), x, tol, m0 + added);
    rep.cycles = added;
    rep.notes = notes;
    Ok((u, v, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CsrMatrix, CsrOperator};

    #[test]
    fn identity_one_iteration() {
        let i = CsrMatrix::<f64>::identity(4);
        let op = CsrOperator::new(&i);
        let b = [1.0, -2.0, 0.5, 3.0];
        let (_, v, rep) = rgcr_solve(&op, Mat::zeros(4, 0), Mat::zeros(4, 0), &b, 1e-12, 10).unwrap();
        assert_eq!(rep.mv_total, 1);
        assert_eq!(v.ncols(), 1);
        assert!(crate::linalg::dense::rel_diff(&rep.x, &b) < 1e-15);
        assert!(rep.converged);
    }

    #[test]
    fn rejects_non_orthonormal_v() {
        let i = CsrMatrix::<f64>::identity(2);
        let op = CsrOperator::new(&i);
        let v = Mat::from_cols(2, &[vec![2.0, 0.0]]);
        assert!(rgcr_solve(&op, v.clone(), v, &[1.0, 1.0], 1e-8, 5).is_err());
    }
}
