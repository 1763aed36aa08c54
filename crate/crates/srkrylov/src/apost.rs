//! Post-iterations that keep the residual orthogonal to a recycled test space.
//!
//! The shadow space starts with `p₁ = w_{n+1}` from the bi-Lanczos source and the
//! auxiliary vectors are `v_{n+1}, …, v_{n+s}` (all orthogonal to `W_n`). IDR
//! cycles then restrict the residual to nested Sonneveld spaces, which keeps
//! `r ⊥ W_n` while `‖r‖` decreases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LinalgError, Result};
use crate::linalg::{axpy, dot, norm2, DenseLu, LinearOperator, Mat};
use crate::scalar::{breakdown_tol, RealScalar, Scalar};
use crate::solvers::{Approach, BiLanczosData, RelaxPolicy};
use num_traits::{Float, Zero};

#[derive(Clone, Debug)]
pub struct ApostState<T: Scalar> {
    pub x: Vec<T>,
    pub r: Vec<T>,
    /// Preimages of `aux_img` (`A·aux_pre = aux_img`).
    pub aux_pre: Mat<T>,
    pub aux_img: Mat<T>,
    pub p: Mat<T>,
    pub policy: RelaxPolicy,
    /// `‖W_sourceᴴr‖/‖r‖` at entry.
    pub entry_defect: f64,
    /// Products spent by `apost_step` so far.
    pub mv: usize,
    pub cycles: usize,
    /// `(mv, ‖b − A·x‖)` after every cycle.
    pub history: Vec<(usize, f64)>,
    pub omegas: Vec<T>,
    /// Set when `Pᴴv` vanished; no further cycles run.
    pub stalled: bool,
    b: Vec<T>,
    slot: usize,
}

/// `‖Wᴴr‖/‖r‖`
pub fn test_space_defect<T: Scalar>(w: &Mat<T>, r: &[T]) -> f64 {
    let rn = norm2(r).to_f64();
    if rn == 0.0 {
        return 0.0;
    }
    norm2(&w.adj_mul_vec(r)).to_f64() / rn
}

/// Prepares post-iterations from the recycled iterate `x` of `A·x = b`.
///
/// Needs a U-approach source with `s − 1` extension columns; `p₂..p_s` are
/// seeded Gaussian vectors.
pub fn apost_init<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    src: &BiLanczosData<T>,
    x: Vec<T>,
    s: usize,
    seed: u64,
) -> Result<ApostState<T>> {
    if s == 0 {
        return Err(LinalgError::Invalid("s must be positive".into()).into());
    }
    if src.approach != Approach::U {
        return Err(LinalgError::Invalid("post-iterations need preimages: use a U-approach source".into()).into());
    }
    let n = src.n;
    if src.v.ncols() < n + s {
        return Err(LinalgError::Invalid(format!("source holds {} columns, need n + s = {}", src.v.ncols(), n + s)).into());
    }
    let u = src.u.as_ref().ok_or_else(|| LinalgError::Invalid("source has no preimage basis".into()))?;
    let dim = b.len();
    let mut p = Mat::zeros(dim, 0);
    p.push_col(src.w_next());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 1..s {
        p.push_col(&crate::linalg::dense::random_vec::<T, _>(dim, &mut rng));
    }
    let ax = a.apply_silent(&x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    let entry_defect = test_space_defect(&src.w_n(), &r);
    let res = norm2(&r).to_f64();
    Ok(ApostState {
        x,
        r,
        aux_pre: u.cols_range(n, n + s),
        aux_img: src.v.cols_range(n, n + s),
        p,
        policy: RelaxPolicy::OmegaOpt,
        entry_defect,
        mv: 0,
        cycles: 0,
        history: vec![(0, res)],
        omegas: Vec::new(),
        stalled: false,
        b: b.to_vec(),
        slot: 0,
    })
}

impl<T: Scalar> ApostState<T> {
    pub fn s(&self) -> usize {
        self.p.ncols()
    }

    pub fn true_resnorm<O: LinearOperator<T> + ?Sized>(&self, a: &O) -> f64 {
        let ax = a.apply_silent(&self.x);
        let r: Vec<T> = self.b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
        norm2(&r).to_f64()
    }

    fn omega(&self, t: &[T], v: &[T]) -> T {
        match &self.policy {
            RelaxPolicy::Fixed(w) => T::lit(*w),
            RelaxPolicy::Richardson { lambda_min, lambda_max } => T::lit(2.0 / (lambda_min + lambda_max)),
            _ => {
                let tt = dot(t, t);
                if tt.modulus() == T::Real::zero() {
                    T::one()
                } else {
                    let w = dot(t, v) / tt;
                    if w.modulus() <= breakdown_tol::<T::Real>() * norm2(v) / norm2(t) {
                        T::from_real(norm2(v) / norm2(t))
                    } else {
                        w
                    }
                }
            }
        }
    }

    /// `γ = (PᴴV)⁻¹·Pᴴ·z`
    fn gamma(&self, z: &[T]) -> Option<Vec<T>> {
        let m = self.p.adj_matmul(&self.aux_img);
        let scale = self.p.norm_fro() * self.aux_img.norm_fro();
        let lu = DenseLu::new(&m).ok()?;
        let smallest = (0..m.nrows()).map(|i| lu.pivot(i).modulus()).fold(T::Real::infinity(), |a, b| a.min(b));
        if smallest <= breakdown_tol::<T::Real>() * scale {
            return None;
        }
        Some(lu.solve(&self.p.adj_mul_vec(z)))
    }

    fn cycle_one<O: LinearOperator<T> + ?Sized>(&mut self, a: &O) -> bool {
        let Some(c) = self.gamma(&self.r) else { return false };
        let (v, u) = (self.aux_img.col(0).to_vec(), self.aux_pre.col(0).to_vec());
        let mut sv = self.r.clone();
        axpy(-c[0], &v, &mut sv);
        let mut xs = self.x.clone();
        axpy(c[0], &u, &mut xs);
        let t = a.apply(&sv);
        let om = self.omega(&t, &sv);
        let mut rn = sv.clone();
        axpy(-om, &t, &mut rn);
        axpy(om, &sv, &mut xs);
        // y = (I − v·(ŵᴴv)⁻¹ŵᴴ)·(r_{j+1} − r_j), preimage −Δx − u·c'
        let dr: Vec<T> = rn.iter().zip(&self.r).map(|(a, b)| *a - *b).collect();
        let Some(c2) = self.gamma(&dr) else { return false };
        let mut y = dr;
        axpy(-c2[0], &v, &mut y);
        let mut ypre: Vec<T> = self.x.iter().zip(&xs).map(|(a, b)| *a - *b).collect();
        axpy(-c2[0], &u, &mut ypre);
        let ay = a.apply(&y);
        let mut vn = y.clone();
        axpy(-om, &ay, &mut vn);
        let mut un = ypre;
        axpy(-om, &y, &mut un);
        self.aux_img.set_col(0, &vn);
        self.aux_pre.set_col(0, &un);
        self.r = rn;
        self.x = xs;
        self.omegas.push(om);
        self.mv += 2;
        true
    }

    /// Prototype IDR(s) cycle on difference vectors: `s + 1` products.
    fn cycle_s<O: LinearOperator<T> + ?Sized>(&mut self, a: &O) -> bool {
        let s = self.s();
        let mut om = T::one();
        for k in 0..=s {
            let Some(c) = self.gamma(&self.r) else { return false };
            let mut v = self.r.clone();
            let mut dx = vec![T::zero(); self.r.len()];
            for (i, ci) in c.iter().enumerate() {
                axpy(-*ci, self.aux_img.col(i), &mut v);
                axpy(*ci, self.aux_pre.col(i), &mut dx);
            }
            let dr_new;
            if k == 0 {
                let t = a.apply(&v);
                om = self.omega(&t, &v);
                self.omegas.push(om);
                axpy(om, &v, &mut dx);
                let mut d: Vec<T> = v.iter().zip(&self.r).map(|(a, b)| *a - *b).collect();
                axpy(-om, &t, &mut d);
                dr_new = d;
            } else {
                axpy(om, &v, &mut dx);
                dr_new = a.apply(&dx).into_iter().map(|e| -e).collect();
            }
            self.mv += 1;
            self.r.iter_mut().zip(&dr_new).for_each(|(r, d)| *r += *d);
            self.x.iter_mut().zip(&dx).for_each(|(x, d)| *x += *d);
            // (pre, img) = (−Δx, Δr)
            let neg: Vec<T> = dx.iter().map(|e| -*e).collect();
            self.aux_img.set_col(self.slot, &dr_new);
            self.aux_pre.set_col(self.slot, &neg);
            self.slot = (self.slot + 1) % s;
        }
        true
    }
}

/// Runs `count` post-cycles (2 products each for `s = 1`, `s + 1` otherwise).
pub fn apost_step<T: Scalar, O: LinearOperator<T> + ?Sized>(mut state: ApostState<T>, a: &O, count: usize) -> ApostState<T> {
    for _ in 0..count {
        if state.stalled {
            break;
        }
        let ok = if state.s() == 1 { state.cycle_one(a) } else { state.cycle_s(a) };
        if !ok {
            state.stalled = true;
            break;
        }
        state.cycles += 1;
        let res = state.true_resnorm(a);
        state.history.push((state.mv, res));
    }
    state
}

/// Cycles until `‖b − A·x‖ ≤ tol·‖b‖`, stagnation or the product budget.
pub fn apost_until<T: Scalar, O: LinearOperator<T> + ?Sized>(mut state: ApostState<T>, a: &O, tol: f64, max_mv: usize) -> ApostState<T> {
    let target = tol * norm2(&state.b).to_f64();
    while !state.stalled && state.mv < max_mv && state.history.last().map_or(f64::INFINITY, |h| h.1) > target {
        let before = state.cycles;
        state = apost_step(state, a, 1);
        if state.cycles == before {
            break;
        }
    }
    state
}
