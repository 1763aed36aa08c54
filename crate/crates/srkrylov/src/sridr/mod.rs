//! Sonneveld-space recycling: reuse `P`, the auxiliary vectors and the
//! relaxations of an earlier IDR run so that each early cycle costs one product.

use crate::error::{LinalgError, Result};
use crate::linalg::{norm2, reduced_qr, DenseLu, LinearOperator, Mat};
use crate::scalar::{RealScalar, Scalar};
use crate::solvers::{run_engine, Capture, EngineSetup, IdrOptions, RelaxPolicy, SolveReport};

/// Recycling payload of an IDR run captured at level `J*`.
#[derive(Clone, Debug, PartialEq)]
pub struct SonneveldRecycleData<T: Scalar> {
    pub p: Mat<T>,
    pub v_aux: Mat<T>,
    /// Preimages: `A·U = V`.
    pub u_aux: Mat<T>,
    pub omegas: Vec<T>,
    pub jstar: usize,
    pub seed: u64,
}

impl<T: Scalar> SonneveldRecycleData<T> {
    pub fn s(&self) -> usize {
        self.p.ncols()
    }
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    /// Largest column defect `‖A·u_i − v_i‖ / ‖v_i‖`.
    pub fn preimage_defect<O: LinearOperator<T> + ?Sized>(&self, a: &O) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.s() {
            let au = a.apply_silent(self.u_aux.col(i));
            let d: Vec<T> = au.iter().zip(self.v_aux.col(i)).map(|(x, y)| *x - *y).collect();
            let nv = norm2(self.v_aux.col(i)).to_f64().max(f64::MIN_POSITIVE);
            worst = worst.max(norm2(&d).to_f64() / nv);
        }
        worst
    }

    /// Same payload with the recycled relaxations permuted (`order[i]` is the source index).
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.omegas.len()];
        if order.len() != self.omegas.len() || order.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(LinalgError::Invalid("omega order must be a permutation".into()).into());
        }
        Ok(SonneveldRecycleData { omegas: order.iter().map(|&i| self.omegas[i]).collect(), ..self.clone() })
    }
}

#[derive(Clone, Debug)]
pub struct SridrOptions {
    pub tol: f64,
    pub max_mv: usize,
    /// Policy for cycles beyond `J*` (and for the free cycles of `Alternating`).
    pub policy: RelaxPolicy,
    /// Snapshot a fresh payload from this run.
    pub capture: Capture,
    pub replace_every: usize,
}

impl SridrOptions {
    pub fn new(tol: f64) -> Self {
        SridrOptions { tol, max_mv: 10_000, policy: RelaxPolicy::OmegaOpt, capture: Capture::None, replace_every: 20 }
    }
}

/// Recycling IDR: `J` level-raising cycles followed by a final projection.
///
/// Cycles `j ≤ J*` reuse `ω_j` and the stored auxiliary vectors (one product
/// each); later cycles choose `ω` by `opts.policy` and rebuild the auxiliary
/// vectors. `J = None` runs until convergence or the product budget.
pub fn sridr_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    recycle: &SonneveldRecycleData<T>,
    cycles: Option<usize>,
    opts: &SridrOptions,
) -> Result<(SolveReport<T>, Option<SonneveldRecycleData<T>>)> {
    if recycle.n() != b.len() {
        return Err(LinalgError::DimensionMismatch { expected: recycle.n(), found: b.len() }.into());
    }
    let s = recycle.s();
    let setup = EngineSetup {
        p: recycle.p.clone(),
        v: recycle.v_aux.clone(),
        u: recycle.u_aux.clone(),
        recycled: recycle.omegas.clone(),
        initial_kloop: false,
        max_cycles: cycles,
        opts: IdrOptions {
            s,
            tol: opts.tol,
            max_mv: opts.max_mv,
            seed: recycle.seed,
            policy: opts.policy.clone(),
            capture: opts.capture,
            replace_every: opts.replace_every,
        },
        label: format!("sridr(s={s};jstar={})", recycle.jstar),
        forced: Vec::new(),
    };
    run_engine(a, b, setup)
}

/// Two-dimensional instance where `G₁ ∩ S = {0}`: `A = [[2, 1], [0, 3]]`,
/// `p = e₁`, `ω₁ = 1/4`, `v₁ = (I − ω₁A)·e₂`. Returns `(A, payload, b)`.
pub fn planar_counterexample() -> (crate::linalg::CsrMatrix<f64>, SonneveldRecycleData<f64>, Vec<f64>) {
    let a = crate::linalg::CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]).expect("static entries");
    let om = 0.25;
    let v = vec![-om, 1.0 - 3.0 * om];
    let u = vec![-1.0 / 6.0, 1.0 / 12.0];
    let data = SonneveldRecycleData {
        p: Mat::from_cols(2, &[vec![1.0, 0.0]]),
        v_aux: Mat::from_cols(2, &[v]),
        u_aux: Mat::from_cols(2, &[u]),
        omegas: vec![om],
        jstar: 1,
        seed: 0,
    };
    (a, data, vec![1.0, 1.0])
}

/// `P := P·η`, `V := V·ν`, `U := U·ν` with `š < s` columns kept.
pub fn throw_columns<T: Scalar>(recycle: &SonneveldRecycleData<T>, nu: &Mat<T>, eta: &Mat<T>) -> Result<SonneveldRecycleData<T>> {
    let s = recycle.s();
    if nu.nrows() != s || eta.nrows() != s || nu.ncols() != eta.ncols() || nu.ncols() > s || nu.ncols() == 0 {
        return Err(LinalgError::Invalid("nu and eta must both be s×š with 0 < š ≤ s".into()).into());
    }
    let p = recycle.p.matmul(eta);
    let v = recycle.v_aux.matmul(nu);
    let u = recycle.u_aux.matmul(nu);
    // rank checks
    reduced_qr(&p)?;
    reduced_qr(&v)?;
    Ok(SonneveldRecycleData { p, v_aux: v, u_aux: u, ..recycle.clone() })
}

/// Distance of `v` from the Sonneveld space `G_{J*}` of the payload.
///
/// `G_J = Ω_J(A)·{ξ ⊥ K*_J(Aᴴ; P)}` equals the orthogonal complement of
/// `Ω_J(A)^{−H}·K*_J(Aᴴ; P)`, which is built densely here (small `N` only).
/// Returns `‖Qᴴv‖ / ‖v‖` for an orthonormal basis `Q` of that test space.
pub fn sonneveld_membership_check<T: Scalar, O: LinearOperator<T> + ?Sized>(
    v: &[T],
    recycle: &SonneveldRecycleData<T>,
    a: &O,
) -> Result<f64> {
    sonneveld_defect(v, &recycle.p, &recycle.omegas, a)
}

/// Membership defect against `G_J` for explicit `P` and `ω_1..ω_J`.
pub fn sonneveld_defect<T: Scalar, O: LinearOperator<T> + ?Sized>(v: &[T], p: &Mat<T>, omegas: &[T], a: &O) -> Result<f64> {
    let nv = norm2(v).to_f64();
    if nv == 0.0 {
        return Ok(0.0);
    }
    let q = match sonneveld_test_space(p, omegas, a)? {
        Some(q) => q,
        None => return Ok(0.0),
    };
    Ok(norm2(&q.adj_mul_vec(v)).to_f64() / nv)
}

/// Orthonormal basis of `Ω_J(A)^{−H}·K*_J(Aᴴ; P)`; `None` when it is empty.
pub fn sonneveld_test_space<T: Scalar, O: LinearOperator<T> + ?Sized>(
    p: &Mat<T>,
    omegas: &[T],
    a: &O,
) -> Result<Option<Mat<T>>> {
    let n = p.nrows();
    let jl = omegas.len();
    if jl == 0 {
        return Ok(None);
    }
    // dense A and Aᴴ
    let mut dense = Mat::zeros(n, n);
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        dense.set_col(j, &a.apply_silent(&e));
    }
    let ah = dense.adjoint();
    // block Arnoldi keeps the power basis well conditioned
    let mut blk = orth_basis(p);
    let mut last = blk.clone();
    for _ in 1..jl {
        let next = ah.matmul(&last);
        let mut both = blk.clone();
        for c in 0..next.ncols() {
            both.push_col(next.col(c));
        }
        let q = orth_basis(&both);
        last = q.cols_range(blk.ncols(), q.ncols());
        blk = q;
        if last.ncols() == 0 {
            break;
        }
    }
    // Ω(A)^{−H} = Π (I − ω̄_j Aᴴ)^{−1}
    for w in omegas {
        let mut f = Mat::identity(n);
        for i in 0..n {
            for j in 0..n {
                f[(i, j)] -= w.conj() * ah[(i, j)];
            }
        }
        let lu = DenseLu::new(&f)?;
        for c in 0..blk.ncols() {
            let y = lu.solve(blk.col(c));
            blk.set_col(c, &y);
        }
    }
    Ok(Some(orth_basis(&blk)))
}

/// Orthonormal basis of the column span, dropping numerically dependent columns.
fn orth_basis<T: Scalar>(b: &Mat<T>) -> Mat<T> {
    let n = b.nrows();
    let mut q = Mat::zeros(n, 0);
    let scale = (0..b.ncols()).map(|j| norm2(b.col(j)).to_f64()).fold(0.0, f64::max);
    for j in 0..b.ncols() {
        let mut v = b.col(j).to_vec();
        for _ in 0..2 {
            let h = q.adj_mul_vec(&v);
            let qh = q.mul_vec(&h);
            v.iter_mut().zip(&qh).for_each(|(a, b)| *a -= *b);
        }
        let nv = norm2(&v);
        let orig = norm2(b.col(j)).to_f64();
        if nv.to_f64() > 1e-10 * orig.max(1e-300) && nv.to_f64() > 1e-14 * scale {
            let inv = T::from_real(num_traits::One::one());
            let nrm = T::from_real(nv);
            v.iter_mut().for_each(|e| *e = *e * inv / nrm);
            q.push_col(&v);
        }
        if q.ncols() == n {
            break;
        }
    }
    q
}

#[cfg(test)]
mod tests;
