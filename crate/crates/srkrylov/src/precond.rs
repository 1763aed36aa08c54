//! Fixed linear preconditioners: operator wrappers, reference Jacobi and
//! symmetric Gauss-Seidel, and Lanczos on `M⁻¹A` in the `M`-inner product.

use std::sync::Arc;

use crate::error::{LinalgError, Result};
use crate::linalg::{axpy, dot, hessenberg_lstsq, norm2, CsrMatrix, LinearOperator, Mat, MvCounter, TriBand};
use crate::scalar::{breakdown_tol, real, RealScalar, Scalar};
use crate::shortrep::{OpSide, ShortRepresentation};
use crate::solvers::{check_hermitian, Approach, Recorder, SolveReport};
use num_traits::{Float, One, Zero};

/// A fixed linear solve `y = M⁻¹x`.
pub trait Preconditioner<T: Scalar>: Send + Sync {
    fn solve(&self, x: &[T]) -> Vec<T>;
    /// `M⁻ᴴx`, when available.
    fn solve_adjoint(&self, _x: &[T]) -> Option<Vec<T>> {
        None
    }
}

impl<T: Scalar, P: Preconditioner<T> + ?Sized> Preconditioner<T> for Arc<P> {
    fn solve(&self, x: &[T]) -> Vec<T> {
        (**self).solve(x)
    }
    fn solve_adjoint(&self, x: &[T]) -> Option<Vec<T>> {
        (**self).solve_adjoint(x)
    }
}

pub struct Identity;

impl<T: Scalar> Preconditioner<T> for Identity {
    fn solve(&self, x: &[T]) -> Vec<T> {
        x.to_vec()
    }
    fn solve_adjoint(&self, x: &[T]) -> Option<Vec<T>> {
        Some(x.to_vec())
    }
}

/// `M = diag(A)`; with `power = ½` it applies `D^{−½}` (split factor).
#[derive(Clone, Debug)]
pub struct Jacobi<T> {
    inv: Vec<T>,
}

impl<T: Scalar> Jacobi<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self> {
        Self::with_power(a, 1.0)
    }

    /// `M = diag(A)^power`
    pub fn with_power(a: &CsrMatrix<T>, power: f64) -> Result<Self> {
        let d = a.diagonal();
        let mut inv = Vec::with_capacity(d.len());
        for (i, v) in d.iter().enumerate() {
            if v.modulus() == T::Real::zero() {
                return Err(LinalgError::Singular { step: i }.into());
            }
            if power == 1.0 {
                inv.push(T::one() / *v);
            } else {
                if v.im() != T::Real::zero() || v.re() < T::Real::zero() {
                    return Err(LinalgError::Invalid("fractional Jacobi powers need a positive diagonal".into()).into());
                }
                inv.push(T::from_real(Float::powf(v.re(), real::<T>(-power))));
            }
        }
        Ok(Jacobi { inv })
    }
}

impl<T: Scalar> Preconditioner<T> for Jacobi<T> {
    fn solve(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.inv).map(|(x, d)| *x * *d).collect()
    }
    fn solve_adjoint(&self, x: &[T]) -> Option<Vec<T>> {
        Some(x.iter().zip(&self.inv).map(|(x, d)| *x * d.conj()).collect())
    }
}

/// Symmetric Gauss-Seidel: `M = (D + L)·D⁻¹·(D + U)`.
#[derive(Clone, Debug)]
pub struct SymGaussSeidel<T> {
    a: CsrMatrix<T>,
    diag: Vec<T>,
}

impl<T: Scalar> SymGaussSeidel<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self> {
        let diag = a.diagonal();
        if let Some(i) = diag.iter().position(|d| d.modulus() == T::Real::zero()) {
            return Err(LinalgError::Singular { step: i }.into());
        }
        Ok(SymGaussSeidel { a: a.clone(), diag })
    }

    fn lower(&self, x: &[T], adjoint: bool) -> Vec<T> {
        // (D + L)⁻¹x, or (D + U)ᴴ⁻¹ for the adjoint
        let m = if adjoint { self.a.adjoint() } else { self.a.clone() };
        let n = x.len();
        let mut y = x.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for (c, v) in m.row(i) {
                if c < i {
                    s -= v * y[c];
                }
            }
            y[i] = s / m.get(i, i);
        }
        y
    }

    fn upper(&self, x: &[T], adjoint: bool) -> Vec<T> {
        let m = if adjoint { self.a.adjoint() } else { self.a.clone() };
        let n = x.len();
        let mut y = x.to_vec();
        for i in (0..n).rev() {
            let mut s = y[i];
            for (c, v) in m.row(i) {
                if c > i {
                    s -= v * y[c];
                }
            }
            y[i] = s / m.get(i, i);
        }
        y
    }
}

impl<T: Scalar> Preconditioner<T> for SymGaussSeidel<T> {
    fn solve(&self, x: &[T]) -> Vec<T> {
        let y = self.lower(x, false);
        let y: Vec<T> = y.iter().zip(&self.diag).map(|(y, d)| *y * *d).collect();
        self.upper(&y, false)
    }
    fn solve_adjoint(&self, x: &[T]) -> Option<Vec<T>> {
        // M⁻ᴴ = (D+L)⁻ᴴ·Dᴴ·(D+U)⁻ᴴ
        let y = self.lower(x, true);
        let y: Vec<T> = y.iter().zip(&self.diag).map(|(y, d)| *y * d.conj()).collect();
        Some(self.upper(&y, true))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecondMode {
    /// `L⁻¹·A·R⁻¹`
    Split,
    /// `M⁻¹·A`
    Left,
    None,
}

/// Preconditioned view of a base operator; counts base products on the base
/// counter and preconditioner solves on `solves`.
pub struct PreconditionedOperator<'a, T: Scalar, O: LinearOperator<T> + ?Sized> {
    base: &'a O,
    left: Option<Arc<dyn Preconditioner<T> + 'a>>,
    right: Option<Arc<dyn Preconditioner<T> + 'a>>,
    pub mode: PrecondMode,
    solves: MvCounter,
}

/// Wraps `a`; `left` is `L` (split) or `M` (left mode), `right` is `R` (split only).
pub fn wrap_precond<'a, T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &'a O,
    left: Option<Arc<dyn Preconditioner<T> + 'a>>,
    right: Option<Arc<dyn Preconditioner<T> + 'a>>,
    mode: PrecondMode,
) -> Result<PreconditionedOperator<'a, T, O>> {
    match mode {
        PrecondMode::Left if left.is_none() || right.is_some() => {
            return Err(LinalgError::Invalid("left mode takes exactly one solve".into()).into())
        }
        PrecondMode::None if left.is_some() || right.is_some() => {
            return Err(LinalgError::Invalid("mode none takes no solves".into()).into())
        }
        _ => {}
    }
    Ok(PreconditionedOperator { base: a, left, right, mode, solves: MvCounter::new() })
}

impl<T: Scalar, O: LinearOperator<T> + ?Sized> PreconditionedOperator<'_, T, O> {
    /// Preconditioner solves performed so far (silent products included).
    pub fn solve_count(&self) -> usize {
        self.solves.get()
    }

    fn fwd(&self, p: &Option<Arc<dyn Preconditioner<T> + '_>>, x: Vec<T>) -> Vec<T> {
        match p {
            Some(p) => {
                self.solves.bump();
                p.solve(&x)
            }
            None => x,
        }
    }

    fn adj(&self, p: &Option<Arc<dyn Preconditioner<T> + '_>>, x: Vec<T>) -> Option<Vec<T>> {
        match p {
            Some(p) => {
                self.solves.bump();
                p.solve_adjoint(&x)
            }
            None => Some(x),
        }
    }
}

impl<T: Scalar, O: LinearOperator<T> + ?Sized> LinearOperator<T> for PreconditionedOperator<'_, T, O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn counter(&self) -> &MvCounter {
        self.base.counter()
    }
    fn apply_silent(&self, x: &[T]) -> Vec<T> {
        let y = self.fwd(&self.right, x.to_vec());
        let ay = self.base.apply_silent(&y);
        self.fwd(&self.left, ay)
    }
    fn adjoint_silent(&self, x: &[T]) -> Option<Vec<T>> {
        let y = self.adj(&self.left, x.to_vec())?;
        let ay = self.base.adjoint_silent(&y)?;
        self.adj(&self.right, ay)
    }
    fn has_adjoint(&self) -> bool {
        self.base.has_adjoint()
    }
}

/// Lanczos basis `Z` of `M⁻¹A` with `ZᴴMZ = I` and `M⁻¹·A·Z = Z̄·T̄`.
#[derive(Clone, Debug)]
pub struct ZLanczosData<T: Scalar> {
    pub approach: Approach,
    /// `n + 1` columns (`n` after a happy breakdown).
    pub z: Mat<T>,
    /// Preimages `F` with `M⁻¹·A·F = Z` (U-approach).
    pub f: Option<Mat<T>>,
    /// `M·Z`
    pub mz: Mat<T>,
    pub band: TriBand<T>,
    pub n: usize,
    /// `‖Z_nᴴMZ_n − I‖_F`
    pub m_ortho_defect: f64,
}

impl<T: Scalar> ZLanczosData<T> {
    pub fn z_n(&self) -> Mat<T> {
        self.z.leading_cols(self.n)
    }
    pub fn z_next(&self) -> Option<&[T]> {
        (self.z.ncols() > self.n).then(|| self.z.col(self.n))
    }
    pub fn band_n(&self) -> TriBand<T> {
        self.band.truncate(self.n)
    }

    /// Short representation of `Z` (or `F`), driven by `M⁻¹A`.
    pub fn short_rep(&self, basis: Approach, stride: usize) -> Result<ShortRepresentation<T>> {
        let full = match basis {
            Approach::V => &self.z,
            Approach::U => self.f.as_ref().ok_or_else(|| LinalgError::Invalid("no preimage basis".into()))?,
        };
        let next = (full.ncols() > self.n).then(|| full.col(self.n).to_vec());
        let mut rep = ShortRepresentation::from_basis(full, &self.band_n(), self.n, stride, next, OpSide::A)?;
        rep.source_defect = self.m_ortho_defect;
        Ok(rep)
    }
}

/// `‖y‖_M` from `y` and `M·y`.
fn mnorm<T: Scalar>(y: &[T], my: &[T]) -> Result<T::Real> {
    let q = dot(y, my);
    if q.re() < T::Real::zero() || q.im().abs() > real::<T>(1e-8) * q.modulus() {
        return Err(LinalgError::Invalid("preconditioner is not positive definite".into()).into());
    }
    Ok(Float::sqrt(q.re()))
}

/// Lanczos for `M⁻¹A` in the `M`-inner product (Hermitian `A`, SPD `M`).
///
/// V-approach: `z₁ ∝ M⁻¹b`; U-approach: `z₁ ∝ M⁻¹Ab` with `f₁ ∝ b`. Solutions
/// `x = Z·T̄†·Z̄ᴴb` (V) or `x = F·(Z̄ᴴ·b̃)`-type minimal residual in the `M⁻¹` norm (U)
/// are tracked every step while `N ≤ 1000`.
pub fn z_lanczos<T: Scalar, O: LinearOperator<T> + ?Sized, P: Preconditioner<T> + ?Sized>(
    a: &O,
    m: &P,
    b: &[T],
    keep: usize,
    approach: Approach,
    tol: f64,
    max_steps: usize,
) -> Result<(ZLanczosData<T>, SolveReport<T>)> {
    let n = b.len();
    check_hermitian(a, n)?;
    let mut rec = Recorder::new(a, b);
    let mut solves = 0usize;
    let bnorm = norm2(b);
    let label = format!("zlanczos({})", if approach == Approach::U { "U" } else { "V" });
    let empty = |approach| ZLanczosData { approach, z: Mat::zeros(n, 0), f: None, mz: Mat::zeros(n, 0), band: TriBand::new(), n: 0, m_ortho_defect: 0.0 };
    if bnorm == T::Real::zero() {
        return Ok((empty(approach), rec.finish(label, vec![T::zero(); n], tol, 0)));
    }
    // q = M·z is carried along so M itself is never applied
    let (q0, f0) = match approach {
        Approach::V => (b.to_vec(), None),
        Approach::U => (a.apply(b), Some(b.to_vec())),
    };
    let z0 = m.solve(&q0);
    solves += 1;
    let beta0 = mnorm(&z0, &q0)?;
    if beta0 == T::Real::zero() {
        return Err(LinalgError::Breakdown { step: 0, what: "M-norm of the start vector" }.into());
    }
    let inv = T::from_real(T::Real::one() / beta0);
    let scale = |v: &[T], s: T| v.iter().map(|e| *e * s).collect::<Vec<T>>();
    let (mut z, mut q) = (scale(&z0, inv), scale(&q0, inv));
    let mut f = f0.map(|f| scale(&f, inv));
    let mut zm = Mat::zeros(n, 0);
    let mut qm = Mat::zeros(n, 0);
    let mut fm = Mat::zeros(n, 0);
    let (mut q_prev, mut f_prev) = (vec![T::zero(); n], vec![T::zero(); n]);
    let mut beta_prev = T::zero();
    let mut band = TriBand::new();
    let mut x = vec![T::zero(); n];
    let thresh = tol * bnorm.to_f64();
    let cap = keep + 1;
    let mut steps = 0;
    let mut converged = false;
    let mut notes = Vec::new();
    let push = |zm: &mut Mat<T>, qm: &mut Mat<T>, fm: &mut Mat<T>, z: &[T], q: &[T], f: &Option<Vec<T>>| {
        if zm.ncols() < cap {
            zm.push_col(z);
            qm.push_col(q);
            if let Some(f) = f {
                fm.push_col(f);
            }
        }
    };
    push(&mut zm, &mut qm, &mut fm, &z, &q, &f);
    loop {
        let need_more = zm.ncols() < cap;
        if (converged && !need_more) || steps >= max_steps.max(if need_more { cap } else { 0 }) {
            break;
        }
        let az = a.apply(&z);
        let alpha = T::from_real(dot(&z, &az).re());
        let mut qh = az;
        axpy(-alpha, &q, &mut qh);
        axpy(-beta_prev, &q_prev, &mut qh);
        let zh = m.solve(&qh);
        solves += 1;
        let beta_r = mnorm(&zh, &qh)?;
        let beta = T::from_real(beta_r);
        band.diag.push(alpha);
        steps += 1;
        let happy = beta_r <= breakdown_tol::<T::Real>() * (alpha.modulus() + beta_prev.modulus());
        band.sub.push(if happy { T::zero() } else { beta });
        band.sup.push(if happy { T::zero() } else { beta });
        if !converged && (rec.mv() < 2 || n <= 1000 || happy) {
            // minimal M⁻¹-norm residual over the current basis
            let j = band.n();
            let y = match approach {
                Approach::V => {
                    let mut c = vec![T::zero(); j + 1];
                    c[0] = T::from_real(beta0);
                    hessenberg_lstsq(&band.bar_dense(), &c).ok().map(|(y, _)| y)
                }
                Approach::U => (zm.ncols() >= j).then(|| zm.leading_cols(j).adj_mul_vec(b)),
            };
            let basis = if approach == Approach::U { &fm } else { &zm };
            if let Some(y) = y.filter(|_| basis.ncols() >= j) {
                x = basis.leading_cols(j).mul_vec(&y);
                rec.record(&x);
                if rec.last_resnorm() <= thresh {
                    converged = true;
                }
            }
        }
        if happy {
            notes.push(format!("invariant subspace after {steps} steps"));
            break;
        }
        let zn = scale(&zh, T::one() / beta);
        let qn = scale(&qh, T::one() / beta);
        if let Some(ff) = f.as_mut() {
            let mut fnext = z.clone();
            axpy(-alpha, ff, &mut fnext);
            axpy(-beta_prev, &f_prev, &mut fnext);
            fnext.iter_mut().for_each(|e| *e /= beta);
            f_prev = std::mem::replace(ff, fnext);
        }
        z = zn;
        q_prev = std::mem::replace(&mut q, qn);
        push(&mut zm, &mut qm, &mut fm, &z, &q, &f);
        beta_prev = beta;
    }
    let stored = zm.ncols();
    let nkeep = keep.min(steps).min(stored);
    let defect = zm.leading_cols(nkeep).adj_matmul(&qm.leading_cols(nkeep)).sub_mat(&Mat::identity(nkeep)).norm_fro().to_f64();
    let data = ZLanczosData {
        approach,
        f: (approach == Approach::U).then_some(fm),
        z: zm,
        mz: qm,
        band,
        n: nkeep,
        m_ortho_defect: defect,
    };
    let mut rep = rec.finish(label, x, tol, steps);
    rep.precond_solves = solves;
    rep.cycles = steps;
    rep.notes = notes;
    Ok((data, rep))
}

/// `x = Z·T̄†·Z̄ᴴ·b` through a short representation of `Z` driven by `M⁻¹A`.
///
/// `op` must be the left-preconditioned operator the representation was built for.
pub fn srz_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    rep_z: &ShortRepresentation<T>,
    op: &PreconditionedOperator<'_, T, O>,
    b: &[T],
    tol: f64,
) -> Result<SolveReport<T>> {
    if op.mode != PrecondMode::Left {
        return Err(LinalgError::Invalid("srz_solve needs the left-preconditioned operator M⁻¹A".into()).into());
    }
    let start = op.mv_count();
    let s0 = op.solve_count();
    let c = rep_z.apply_vbar_h(op, b)?;
    let (y, _) = hessenberg_lstsq(&rep_z.band.bar_dense(), &c)?;
    let x = rep_z.apply_v(op, &y)?;
    let physical = op.mv_count() - start;
    let solves = op.solve_count() - s0;
    let ax = op.base.apply_silent(&x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    let bn = norm2(b).to_f64();
    let res = norm2(&r).to_f64();
    Ok(SolveReport {
        method: format!("srz(n={};J={})", rep_z.n, rep_z.stride),
        x,
        history: vec![(0, bn), (2 * rep_z.stride, res)],
        converged: res <= tol * bn,
        mv_total: 2 * rep_z.stride,
        rd_total: rep_z.n,
        mv_physical: physical,
        precond_solves: solves,
        cycles: 1,
        bnorm: bn,
        markers: Vec::new(),
        defect: None,
        notes: Vec::new(),
    })
}
