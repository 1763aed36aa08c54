use crate::error::{LinalgError, Result};
use crate::linalg::{axpy, dot, norm2, Givens, LinearOperator, Mat, TriBand};
use crate::scalar::{breakdown_tol, real, RealScalar, Scalar};
use num_traits::{Float, One, Zero};

use super::report::{Marker, Recorder, SolveReport};

/// Whether solutions are formed from the preimage basis `U` (`A·U = V`) or from `V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Approach {
    U,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LanczosMode {
    Cg,
    Minres,
}

/// Bi-Lanczos decomposition `A·V = V̄·T̄`, `Aᴴ·W = W̄·T̲ᴴ`, `WᴴV = I`.
///
/// Matrices hold `n + 1 + extra` columns: the basis, the next column and any
/// extension columns requested for post-iterations. `u` (preimages of `v`) is
/// present for the U-approach.
#[derive(Clone, Debug)]
pub struct BiLanczosData<T: Scalar> {
    pub approach: Approach,
    pub u: Option<Mat<T>>,
    pub v: Mat<T>,
    pub w: Mat<T>,
    /// Recursion coefficients for all stored columns.
    pub band: TriBand<T>,
    pub n: usize,
    /// `‖W_nᴴV_n − I‖_F`
    pub biortho_defect: f64,
}

impl<T: Scalar> BiLanczosData<T> {
    pub fn v_n(&self) -> Mat<T> {
        self.v.leading_cols(self.n)
    }
    pub fn w_n(&self) -> Mat<T> {
        self.w.leading_cols(self.n)
    }
    pub fn u_n(&self) -> Option<Mat<T>> {
        self.u.as_ref().map(|u| u.leading_cols(self.n))
    }
    pub fn v_next(&self) -> &[T] {
        self.v.col(self.n)
    }
    pub fn w_next(&self) -> &[T] {
        self.w.col(self.n)
    }
    pub fn u_next(&self) -> Option<&[T]> {
        self.u.as_ref().map(|u| u.col(self.n))
    }
    /// `T̄` restricted to the first `n` columns.
    pub fn band_n(&self) -> TriBand<T> {
        self.band.truncate(self.n)
    }
    /// Stored columns beyond `n + 1`.
    pub fn extra(&self) -> usize {
        self.v.ncols() - self.n - 1
    }
    /// Same data truncated to `n` columns (keeps extension columns after it).
    pub fn truncated(&self, n: usize) -> Self {
        let keep = (n + 1 + self.extra()).min(self.v.ncols());
        let n = n.min(self.n);
        BiLanczosData {
            approach: self.approach,
            u: self.u.as_ref().map(|u| u.leading_cols(keep)),
            v: self.v.leading_cols(keep),
            w: self.w.leading_cols(keep),
            band: self.band.truncate(keep.saturating_sub(1).max(n)),
            n,
            biortho_defect: biortho_defect(&self.w.leading_cols(n), &self.v.leading_cols(n)),
        }
    }
}

/// Symmetric Lanczos decomposition `A·V = V̄·T̄`.
#[derive(Clone, Debug)]
pub struct LanczosData<T: Scalar> {
    pub approach: Approach,
    pub u: Option<Mat<T>>,
    /// `n + 1` columns (`n` after a happy breakdown).
    pub v: Mat<T>,
    pub band: TriBand<T>,
    pub n: usize,
    /// `‖V_nᴴV_n − I‖_F`
    pub ortho_defect: f64,
}

impl<T: Scalar> LanczosData<T> {
    pub fn v_n(&self) -> Mat<T> {
        self.v.leading_cols(self.n)
    }
    pub fn u_n(&self) -> Option<Mat<T>> {
        self.u.as_ref().map(|u| u.leading_cols(self.n))
    }
    pub fn v_next(&self) -> Option<&[T]> {
        (self.v.ncols() > self.n).then(|| self.v.col(self.n))
    }
    pub fn band_n(&self) -> TriBand<T> {
        self.band.truncate(self.n)
    }
}

pub fn biortho_defect<T: Scalar>(w: &Mat<T>, v: &Mat<T>) -> f64 {
    if v.ncols() == 0 {
        return 0.0;
    }
    w.adj_matmul(v).sub_mat(&Mat::identity(v.ncols())).norm_fro().to_f64()
}

#[derive(Clone, Debug)]
pub struct BiLanczosOptions<T: Scalar> {
    pub approach: Approach,
    /// Left start vector; defaults to `b`.
    pub w1: Option<Vec<T>>,
    /// Basis columns kept for recycling.
    pub keep: usize,
    /// Extra columns `v_{n+2}, …` kept after the basis.
    pub extra: usize,
    pub tol: f64,
    pub max_steps: usize,
}

impl<T: Scalar> BiLanczosOptions<T> {
    pub fn new(approach: Approach, keep: usize, tol: f64) -> Self {
        BiLanczosOptions { approach, w1: None, keep, extra: 0, tol, max_steps: 10_000 }
    }
}

struct Store<T: Scalar> {
    m: Mat<T>,
    cap: usize,
}

impl<T: Scalar> Store<T> {
    fn new(n: usize, cap: usize) -> Self {
        Store { m: Mat::zeros(n, 0), cap }
    }
    fn push(&mut self, c: &[T]) {
        if self.m.ncols() < self.cap {
            self.m.push_col(c);
        }
    }
}

fn scaled<T: Scalar>(x: &[T], a: T) -> Vec<T> {
    x.iter().map(|v| *v * a).collect()
}

/// BiCG through two-sided Lanczos with unit biorthogonal scaling.
///
/// Runs until the recursive residual drops below `tol·‖b‖` (or `max_steps`),
/// but never fewer steps than needed to fill `keep + extra` stored columns.
pub fn bicg_bilanczos<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    opts: &BiLanczosOptions<T>,
) -> Result<(BiLanczosData<T>, SolveReport<T>)> {
    if !a.has_adjoint() {
        return Err(LinalgError::NoAdjoint.into());
    }
    let n = b.len();
    let mut rec = Recorder::new(a, b);
    let bnorm = norm2(b);
    let thresh = real::<T>(opts.tol) * bnorm;
    let cap = opts.keep + 1 + opts.extra;
    let mut vs = Store::new(n, cap);
    let mut ws = Store::new(n, cap);
    let mut us = Store::new(n, cap);
    let mut band = TriBand::new();
    let mut x = vec![T::zero(); n];
    if bnorm == T::Real::zero() {
        let data = BiLanczosData { approach: opts.approach, u: None, v: Mat::zeros(n, 0), w: Mat::zeros(n, 0), band, n: 0, biortho_defect: 0.0 };
        return Ok((data, rec.finish(format!("bicg({})", approach_tag(opts.approach)), x, opts.tol, 0)));
    }
    let (mut v, mut u) = match opts.approach {
        Approach::U => {
            let ab = a.apply(b);
            let nab = norm2(&ab);
            if nab == T::Real::zero() {
                return Err(LinalgError::Breakdown { step: 0, what: "A·b = 0" }.into());
            }
            let inv = T::from_real(T::Real::one() / nab);
            (scaled(&ab, inv), Some(scaled(b, inv)))
        }
        Approach::V => (scaled(b, T::from_real(T::Real::one() / bnorm)), None),
    };
    let wsrc = opts.w1.clone().unwrap_or_else(|| b.to_vec());
    let wv = dot(&wsrc, &v);
    if wv.modulus() <= breakdown_tol::<T::Real>() * norm2(&wsrc) {
        return Err(LinalgError::Breakdown { step: 0, what: "w₁ᴴv₁ = 0" }.into());
    }
    let mut w = scaled(&wsrc, T::one() / wv.conj());
    let (mut v_prev, mut w_prev, mut u_prev) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    let (mut beta_prev, mut gamma_prev) = (T::zero(), T::zero());
    // V-approach progressive LU
    let (mut eta_prev, mut zeta) = (T::zero(), T::from_real(bnorm));
    let mut pdir = vec![T::zero(); n];
    let mut r = b.to_vec();
    let mut converged = false;
    let mut steps = 0usize;
    let mut notes = Vec::new();
    vs.push(&v);
    ws.push(&w);
    if let Some(uu) = &u {
        us.push(uu);
    }
    loop {
        let need_more = vs.m.ncols() < cap;
        if (converged && !need_more) || steps >= opts.max_steps.max(if need_more { cap } else { 0 }) {
            break;
        }
        let av = a.apply(&v);
        let aw = a.apply_adjoint(&w)?;
        let alpha = dot(&w, &av);
        // solution update for column `steps`
        if !converged {
            match opts.approach {
                Approach::U => {
                    let c = dot(&w, b);
                    axpy(c, u.as_ref().unwrap(), &mut x);
                    axpy(-c, &v, &mut r);
                }
                Approach::V => {
                    let eta = if steps == 0 {
                        alpha
                    } else {
                        let lam = beta_prev / eta_prev;
                        zeta = -lam * zeta;
                        alpha - lam * gamma_prev
                    };
                    if eta.modulus() <= breakdown_tol::<T::Real>() * alpha.modulus().max(beta_prev.modulus()).max(T::Real::min_positive_value()) {
                        return Err(LinalgError::Breakdown { step: steps, what: "tridiagonal pivot (T singular)" }.into());
                    }
                    let mut pn = v.clone();
                    axpy(-gamma_prev, &pdir, &mut pn);
                    pn.iter_mut().for_each(|e| *e /= eta);
                    pdir = pn;
                    axpy(zeta, &pdir, &mut x);
                    eta_prev = eta;
                }
            }
        }
        let mut vh = av;
        axpy(-alpha, &v, &mut vh);
        axpy(-gamma_prev, &v_prev, &mut vh);
        let mut wh = aw;
        axpy(-alpha.conj(), &w, &mut wh);
        axpy(-beta_prev.conj(), &w_prev, &mut wh);
        let beta_r = norm2(&vh);
        let beta = T::from_real(beta_r);
        band.diag.push(alpha);
        steps += 1;
        if !converged {
            let rn = match opts.approach {
                Approach::U => norm2(&r),
                Approach::V => (beta * zeta / eta_prev).modulus(),
            };
            rec.record(&x);
            if rn <= thresh {
                converged = true;
            }
        }
        if steps == opts.keep {
            rec.mark(Marker::Capture);
        }
        let scale = norm2(&v).max(T::Real::one()) * (alpha.modulus() + beta_r + gamma_prev.modulus());
        if beta_r <= breakdown_tol::<T::Real>() * scale {
            notes.push(format!("invariant subspace after {steps} steps"));
            band.sub.push(T::zero());
            band.sup.push(T::zero());
            break;
        }
        let gamma = dot(&wh, &vh) / beta;
        if gamma.modulus() <= breakdown_tol::<T::Real>() * norm2(&wh) {
            return Err(LinalgError::Breakdown { step: steps, what: "bi-orthogonality wᴴv" }.into());
        }
        band.sub.push(beta);
        band.sup.push(gamma);
        let vn = scaled(&vh, T::one() / beta);
        let wn = scaled(&wh, T::one() / gamma.conj());
        if let Some(uu) = u.as_mut() {
            let mut un = v.clone();
            axpy(-alpha, uu, &mut un);
            axpy(-gamma_prev, &u_prev, &mut un);
            un.iter_mut().for_each(|e| *e /= beta);
            u_prev = std::mem::replace(uu, un);
            us.push(uu);
        }
        v_prev = std::mem::replace(&mut v, vn);
        w_prev = std::mem::replace(&mut w, wn);
        vs.push(&v);
        ws.push(&w);
        beta_prev = beta;
        gamma_prev = gamma;
    }
    let stored = vs.m.ncols();
    let nkeep = opts.keep.min(stored.saturating_sub(1)).min(steps);
    let nkeep = if stored == steps { stored.min(opts.keep) } else { nkeep };
    let vmat = vs.m;
    let wmat = ws.m;
    let umat = if opts.approach == Approach::U { Some(us.m) } else { None };
    band = band.truncate(band.n().min(vmat.ncols().max(1)));
    let data = BiLanczosData {
        approach: opts.approach,
        biortho_defect: biortho_defect(&wmat.leading_cols(nkeep), &vmat.leading_cols(nkeep)),
        u: umat,
        v: vmat,
        w: wmat,
        band,
        n: nkeep,
    };
    let mut rep = rec.finish(format!("bicg({})", approach_tag(opts.approach)), x, opts.tol, steps);
    rep.notes = notes;
    rep.cycles = steps;
    Ok((data, rep))
}

fn approach_tag(a: Approach) -> &'static str {
    match a {
        Approach::U => "U",
        Approach::V => "V",
    }
}

/// Symmetric Lanczos with CG (progressive LU) or MINRES (progressive Givens) solutions.
///
/// The U-approach starts from `u₁ = b/‖Ab‖` and only supports MINRES.
pub fn sym_lanczos_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    keep: usize,
    mode: LanczosMode,
    approach: Approach,
    tol: f64,
    max_steps: usize,
) -> Result<(LanczosData<T>, SolveReport<T>)> {
    let n = b.len();
    if approach == Approach::U && mode == LanczosMode::Cg {
        return Err(LinalgError::Invalid("the U-approach supports minres mode only".into()).into());
    }
    check_hermitian(a, n)?;
    let mut rec = Recorder::new(a, b);
    let bnorm = norm2(b);
    let thresh = real::<T>(tol) * bnorm;
    let cap = keep + 1;
    let mut vs = Store::new(n, cap);
    let mut us = Store::new(n, cap);
    let mut band = TriBand::new();
    let mut x = vec![T::zero(); n];
    let label = format!(
        "lanczos({};{})",
        match mode {
            LanczosMode::Cg => "cg",
            LanczosMode::Minres => "minres",
        },
        approach_tag(approach)
    );
    if bnorm == T::Real::zero() {
        let data = LanczosData { approach, u: None, v: Mat::zeros(n, 0), band, n: 0, ortho_defect: 0.0 };
        return Ok((data, rec.finish(label, x, tol, 0)));
    }
    let (mut v, mut u) = match approach {
        Approach::U => {
            let ab = a.apply(b);
            let nab = norm2(&ab);
            let inv = T::from_real(T::Real::one() / nab);
            (scaled(&ab, inv), Some(scaled(b, inv)))
        }
        Approach::V => (scaled(b, T::from_real(T::Real::one() / bnorm)), None),
    };
    let (mut v_prev, mut u_prev) = (vec![T::zero(); n], vec![T::zero(); n]);
    let mut beta_prev = T::zero();
    // cg state
    let (mut eta_prev, mut zeta) = (T::zero(), T::from_real(bnorm));
    let mut pdir = vec![T::zero(); n];
    // minres state
    let (mut g1, mut g2): (Option<Givens<T>>, Option<Givens<T>>) = (None, None);
    let mut gcur = T::from_real(bnorm);
    let (mut d1, mut d2) = (vec![T::zero(); n], vec![T::zero(); n]);
    let mut r = b.to_vec();
    let mut converged = false;
    let mut steps = 0;
    let mut notes = Vec::new();
    vs.push(&v);
    if let Some(uu) = &u {
        us.push(uu);
    }
    loop {
        let need_more = vs.m.ncols() < cap;
        if (converged && !need_more) || steps >= max_steps.max(if need_more { cap } else { 0 }) {
            break;
        }
        let av = a.apply(&v);
        let alpha = T::from_real(dot(&v, &av).re());
        let mut vh = av;
        axpy(-alpha, &v, &mut vh);
        axpy(-beta_prev, &v_prev, &mut vh);
        let beta_r = norm2(&vh);
        let beta = T::from_real(beta_r);
        if !converged {
            let rn = match (approach, mode) {
                (Approach::U, _) => {
                    let c = dot(&v, b);
                    axpy(c, u.as_ref().unwrap(), &mut x);
                    axpy(-c, &v, &mut r);
                    norm2(&r)
                }
                (Approach::V, LanczosMode::Cg) => {
                    let eta = if steps == 0 {
                        alpha
                    } else {
                        let lam = beta_prev / eta_prev;
                        zeta = -lam * zeta;
                        alpha - lam * beta_prev
                    };
                    if eta.modulus() <= breakdown_tol::<T::Real>() * alpha.modulus().max(beta_prev.modulus()).max(T::Real::min_positive_value()) {
                        return Err(LinalgError::Breakdown { step: steps, what: "T singular in cg mode (use minres)" }.into());
                    }
                    let mut pn = v.clone();
                    axpy(-beta_prev, &pdir, &mut pn);
                    pn.iter_mut().for_each(|e| *e /= eta);
                    pdir = pn;
                    axpy(zeta, &pdir, &mut x);
                    eta_prev = eta;
                    (beta * zeta / eta).modulus()
                }
                (Approach::V, LanczosMode::Minres) => {
                    // column of T̄: (β_{j−1}, α_j, β_j) in rows j−1, j, j+1
                    let (mut eps, mut delta, mut rho) = (T::zero(), beta_prev, alpha);
                    if let Some(g) = g2 {
                        let (a0, b0) = g.apply(T::zero(), delta);
                        eps = a0;
                        delta = b0;
                    }
                    if let Some(g) = g1 {
                        let (a0, b0) = g.apply(delta, rho);
                        delta = a0;
                        rho = b0;
                    }
                    let (g, rr) = Givens::zeroing(rho, beta);
                    if rr.modulus() <= breakdown_tol::<T::Real>() * (alpha.modulus() + beta_r + beta_prev.modulus()) {
                        return Err(LinalgError::Breakdown { step: steps, what: "minres rotation" }.into());
                    }
                    let (tau, gnext) = g.apply(gcur, T::zero());
                    gcur = gnext;
                    let mut dn = v.clone();
                    axpy(-delta, &d1, &mut dn);
                    axpy(-eps, &d2, &mut dn);
                    dn.iter_mut().for_each(|e| *e /= rr);
                    axpy(tau, &dn, &mut x);
                    d2 = std::mem::replace(&mut d1, dn);
                    g2 = g1;
                    g1 = Some(g);
                    gcur.modulus()
                }
            };
            rec.record(&x);
            if rn <= thresh {
                converged = true;
            }
        }
        band.diag.push(alpha);
        steps += 1;
        if steps == keep {
            rec.mark(Marker::Capture);
        }
        if beta_r <= breakdown_tol::<T::Real>() * (alpha.modulus() + beta_r + beta_prev.modulus()) {
            notes.push(format!("invariant subspace after {steps} steps"));
            band.sub.push(T::zero());
            band.sup.push(T::zero());
            break;
        }
        band.sub.push(beta);
        band.sup.push(beta);
        let vn = scaled(&vh, T::one() / beta);
        if let Some(uu) = u.as_mut() {
            let mut un = v.clone();
            axpy(-alpha, uu, &mut un);
            axpy(-beta_prev, &u_prev, &mut un);
            un.iter_mut().for_each(|e| *e /= beta);
            u_prev = std::mem::replace(uu, un);
            us.push(uu);
        }
        v_prev = std::mem::replace(&mut v, vn);
        vs.push(&v);
        beta_prev = beta;
    }
    let nkeep = keep.min(steps);
    let vmat = vs.m;
    let ortho = {
        let vn = vmat.leading_cols(nkeep);
        vn.adj_matmul(&vn).sub_mat(&Mat::identity(nkeep)).norm_fro().to_f64()
    };
    let data = LanczosData {
        approach,
        u: if approach == Approach::U { Some(us.m) } else { None },
        v: vmat,
        band,
        n: nkeep,
        ortho_defect: ortho,
    };
    let mut rep = rec.finish(label, x, tol, steps);
    rep.notes = notes;
    rep.cycles = steps;
    Ok((data, rep))
}

/// Probabilistic Hermitian check with two seeded random vectors.
pub(crate) fn check_hermitian<T: Scalar, O: LinearOperator<T> + ?Sized>(a: &O, n: usize) -> Result<()> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let x: Vec<T> = crate::linalg::dense::random_vec(n, &mut rng);
    let y: Vec<T> = crate::linalg::dense::random_vec(n, &mut rng);
    let d = crate::linalg::operator::hermitian_defect(a, &x, &y).to_f64();
    if d > 1e-8 {
        return Err(LinalgError::Invalid(format!("operator is not Hermitian (probe defect {d:e})")).into());
    }
    Ok(())
}
