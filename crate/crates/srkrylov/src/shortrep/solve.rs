use super::ShortRepresentation;
use crate::error::{LinalgError, Result};
use crate::linalg::{hessenberg_lstsq, norm2, DenseLu, LinearOperator};
use crate::scalar::{RealScalar, Scalar};
use crate::solvers::{Approach, SolveReport};

/// Threshold on the source (bi)orthogonality defect above which blocking is advised.
const BLOCKING_HINT: f64 = 1e-4;

pub(crate) fn tri_solve<T: Scalar>(rep: &ShortRepresentation<T>, c: &[T], adjoint: bool, hint: &'static str) -> Result<Vec<T>> {
    let lu = DenseLu::new(&rep.band.square_dense()).map_err(|_| LinalgError::Breakdown { step: rep.n, what: hint })?;
    Ok(if adjoint { lu.solve_adjoint(c) } else { lu.solve(c) })
}

fn residual<T: Scalar, O: LinearOperator<T> + ?Sized>(a: &O, x: &[T], b: &[T], dual: bool) -> Result<Vec<T>> {
    let ax = if dual { a.adjoint_silent(x).ok_or(LinalgError::NoAdjoint)? } else { a.apply_silent(x) };
    Ok(b.iter().zip(&ax).map(|(b, a)| *b - *a).collect())
}

#[allow(clippy::too_many_arguments)]
fn oneshot<T: Scalar>(
    method: String,
    b: &[T],
    x: Vec<T>,
    r: &[T],
    stride: usize,
    rd: usize,
    physical: usize,
    defect: f64,
    tol: f64,
) -> SolveReport<T> {
    let bnorm = norm2(b).to_f64();
    let res = norm2(r).to_f64();
    let nominal = 2 * stride;
    SolveReport {
        method,
        x,
        history: vec![(0, bnorm), (nominal, res)],
        converged: res <= tol * bnorm,
        mv_total: nominal,
        rd_total: rd,
        mv_physical: physical,
        precond_solves: 0,
        cycles: 1,
        bnorm,
        markers: Vec::new(),
        defect: Some(defect),
        notes: Vec::new(),
    }
}

fn rel(x: &[impl Scalar], bnorm: f64) -> f64 {
    let n = x.iter().map(|v| v.abs_sqr().to_f64()).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        n
    } else {
        n / bnorm
    }
}

fn hint<T: Scalar>(rep: &mut SolveReport<T>, defect: f64) {
    if defect > BLOCKING_HINT {
        rep.notes.push(format!("source biorthogonality defect {defect:.2e}: consider blocking"));
    }
}

/// `x = V·T⁻¹·Vᴴ·b` (symmetric Lanczos source).
pub fn srcg_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(rep: &ShortRepresentation<T>, a: &O, b: &[T], tol: f64) -> Result<SolveReport<T>> {
    let start = a.mv_count();
    let c = rep.apply_vh(a, b)?;
    let y = tri_solve(rep, &c, false, "T singular (use srmr_solve)")?;
    let x = rep.apply_v(a, &y)?;
    let physical = a.mv_count() - start;
    let r = residual(a, &x, b, false)?;
    let defect = rel(&rep.apply_vh_silent(a, &r)?, norm2(b).to_f64());
    let mut out = oneshot(format!("srcg(n={};J={})", rep.n, rep.stride), b, x, &r, rep.stride, rep.n, physical, defect, tol);
    hint(&mut out, rep.source_defect);
    Ok(out)
}

/// Residual-minimizing recycled solve.
///
/// V-approach: `x = V·T̄†·V̄ᴴ·b`. U-approach (preimage basis with
/// orthonormal image, Hermitian `A`): `x = U·Uᴴ·A·b`.
pub fn srmr_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    rep: &ShortRepresentation<T>,
    a: &O,
    b: &[T],
    approach: Approach,
    tol: f64,
) -> Result<SolveReport<T>> {
    let start = a.mv_count();
    let bnorm = norm2(b).to_f64();
    let x = match approach {
        Approach::V => {
            let c = rep.apply_vbar_h(a, b)?;
            let (y, _) = hessenberg_lstsq(&rep.band.bar_dense(), &c)?;
            rep.apply_v(a, &y)?
        }
        Approach::U => {
            let ab = a.apply(b);
            let c = rep.apply_vh(a, &ab)?;
            rep.apply_v(a, &c)?
        }
    };
    let physical = a.mv_count() - start;
    let r = residual(a, &x, b, false)?;
    // (A·B)ᴴr = Bᴴ(A·r) for Hermitian A
    let ar = a.apply_silent(&r);
    let mut defect = rel(&rep.apply_vh_silent(a, &ar)?, bnorm);
    if approach == Approach::V {
        defect /= rep.band.bar_dense().norm_fro().to_f64().max(f64::MIN_POSITIVE);
    }
    let tag = if approach == Approach::U { "U" } else { "V" };
    let mut out = oneshot(format!("srmr(n={};J={};{tag})", rep.n, rep.stride), b, x, &r, rep.stride, rep.n, physical, defect, tol);
    hint(&mut out, rep.source_defect);
    Ok(out)
}

/// Recycled BiCG: `x = U·Wᴴ·b` (U-approach) or `x = V·T⁻¹·Wᴴ·b` (V-approach).
pub fn srbicg_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    rep_main: &ShortRepresentation<T>,
    rep_w: &ShortRepresentation<T>,
    a: &O,
    b: &[T],
    approach: Approach,
    tol: f64,
) -> Result<SolveReport<T>> {
    if rep_main.n != rep_w.n {
        return Err(LinalgError::DimensionMismatch { expected: rep_main.n, found: rep_w.n }.into());
    }
    let start = a.mv_count();
    let c = rep_w.apply_vh(a, b)?;
    let y = match approach {
        Approach::U => c,
        Approach::V => tri_solve(rep_main, &c, false, "T singular")?,
    };
    let x = rep_main.apply_v(a, &y)?;
    let physical = a.mv_count() - start;
    let r = residual(a, &x, b, false)?;
    let defect = rel(&rep_w.apply_vh_silent(a, &r)?, norm2(b).to_f64());
    let tag = if approach == Approach::U { "U" } else { "V" };
    let mut out = oneshot(format!("srbicg(n={};J={};{tag})", rep_main.n, rep_main.stride), b, x, &r, rep_main.stride, rep_main.n, physical, defect, tol);
    hint(&mut out, rep_main.source_defect.max(rep_w.source_defect));
    Ok(out)
}

/// Dual system `Aᴴ·x = b` from the same payload: `x = W·Uᴴ·b` (U-approach,
/// `rep_other` over `U`) or `x = W·T⁻ᴴ·Vᴴ·b` (V-approach, `rep_other` over `V`).
pub fn srbicg_dual_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    rep_w: &ShortRepresentation<T>,
    rep_other: &ShortRepresentation<T>,
    a: &O,
    b: &[T],
    approach: Approach,
    tol: f64,
) -> Result<SolveReport<T>> {
    if rep_other.n != rep_w.n {
        return Err(LinalgError::DimensionMismatch { expected: rep_other.n, found: rep_w.n }.into());
    }
    let start = a.mv_count();
    let c = rep_other.apply_vh(a, b)?;
    let y = match approach {
        Approach::U => c,
        Approach::V => tri_solve(rep_other, &c, true, "T singular")?,
    };
    let x = rep_w.apply_v(a, &y)?;
    let physical = a.mv_count() - start;
    let r = residual(a, &x, b, true)?;
    let defect = rel(&rep_other.apply_vh_silent(a, &r)?, norm2(b).to_f64());
    let tag = if approach == Approach::U { "U" } else { "V" };
    let mut out = oneshot(format!("srbicg_dual(n={};J={};{tag})", rep_w.n, rep_w.stride), b, x, &r, rep_w.stride, rep_w.n, physical, defect, tol);
    hint(&mut out, rep_w.source_defect.max(rep_other.source_defect));
    Ok(out)
}
