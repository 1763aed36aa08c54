use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LinalgError, Result};
use crate::linalg::{axpy, dot, norm2, reduced_qr, DenseLu, LinearOperator, Mat};
use crate::scalar::{breakdown_tol, real, RealScalar, Scalar};
use crate::sridr::SonneveldRecycleData;
use num_traits::Zero;

use super::report::{Marker, Recorder, SolveReport};

/// How `ω` is chosen when it is not recycled.
#[derive(Clone, Debug, PartialEq)]
pub enum RelaxPolicy {
    /// `ω = ⟨Ar, r⟩ / ‖Ar‖²`
    OmegaOpt,
    /// `ω = 2 / (λmax + λmin)`
    Richardson { lambda_min: f64, lambda_max: f64 },
    /// Recycled and freshly chosen (`OmegaOpt`) cycles take turns.
    Alternating,
    Fixed(f64),
}

impl Default for RelaxPolicy {
    fn default() -> Self {
        RelaxPolicy::OmegaOpt
    }
}

/// When an IDR run snapshots its recycling payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Capture {
    None,
    /// After the auxiliary loop that lifts the auxiliary vectors to level `J*`.
    At(usize),
    /// Deepest complete level reached before convergence.
    Max,
}

#[derive(Clone, Debug)]
pub struct IdrOptions {
    pub s: usize,
    pub tol: f64,
    pub max_mv: usize,
    pub seed: u64,
    pub policy: RelaxPolicy,
    pub capture: Capture,
    /// Cycles between residual replacements `r := b − A·x`; 0 disables them.
    pub replace_every: usize,
}

impl IdrOptions {
    pub fn new(s: usize, tol: f64) -> Self {
        IdrOptions {
            s,
            tol,
            max_mv: 10_000,
            seed: 0,
            policy: RelaxPolicy::OmegaOpt,
            capture: Capture::None,
            replace_every: 20,
        }
    }
}

/// Seeded Gaussian `N×s` block, orthonormalized.
pub fn random_shadow<T: Scalar>(n: usize, s: usize, seed: u64) -> Result<Mat<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = Mat::random(n, s, &mut rng);
    Ok(reduced_qr(&p)?.0)
}

pub(crate) struct EngineSetup<T: Scalar> {
    pub p: Mat<T>,
    pub v: Mat<T>,
    pub u: Mat<T>,
    /// `ω_1..ω_{J*}` reused for the first `J*` levels.
    pub recycled: Vec<T>,
    /// Run the level-0 auxiliary loop first (plain IDR start).
    pub initial_kloop: bool,
    /// Number of level-raising cycles before the final projection; `None` runs to convergence.
    pub max_cycles: Option<usize>,
    pub opts: IdrOptions,
    pub label: String,
    /// Override for the first fresh `ω` choices (comparison studies).
    pub forced: Vec<T>,
}

struct Engine<'a, T: Scalar, O: LinearOperator<T> + ?Sized> {
    a: &'a O,
    b: &'a [T],
    s: usize,
    p: Mat<T>,
    v: Mat<T>,
    u: Mat<T>,
    m: Mat<T>,
    x: Vec<T>,
    r: Vec<T>,
    f: Vec<T>,
    thresh: T::Real,
    rec: Recorder<'a, T, O>,
    rd: usize,
    notes: Vec<String>,
    replacements: usize,
    done: bool,
}

impl<'a, T: Scalar, O: LinearOperator<T> + ?Sized> Engine<'a, T, O> {
    fn refresh_f(&mut self) {
        self.f = self.p.adj_mul_vec(&self.r);
    }

    fn replace(&mut self) {
        let ax = self.a.apply(&self.x);
        self.r = self.b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
        self.refresh_f();
        self.rec.step(&self.x);
    }

    /// Recursive-residual test; drift is repaired by a counted replacement.
    fn check(&mut self) -> bool {
        if norm2(&self.r) > self.thresh {
            return false;
        }
        let tr = self.rec.true_resnorm(&self.x);
        if tr <= self.thresh * real::<T>(1.0 + 1e-6) || self.replacements >= 3 {
            self.done = true;
            return true;
        }
        self.replacements += 1;
        self.notes.push("residual drift repaired by replacement".into());
        self.replace();
        if norm2(&self.r) <= self.thresh {
            self.done = true;
        }
        self.done
    }

    /// `γ = M⁻¹·Pᴴr` with lower triangular `M`, then `x += Uγ`, `r −= Vγ`.
    fn project(&mut self) -> Result<()> {
        self.refresh_f();
        let gam = lower_solve(&self.m, &self.f, 0)?;
        let ug = self.u.mul_vec(&gam);
        let vg = self.v.mul_vec(&gam);
        axpy(T::one(), &ug, &mut self.x);
        axpy(-T::one(), &vg, &mut self.r);
        self.refresh_f();
        self.rec.record(&self.x);
        Ok(())
    }

    /// Auxiliary loop (biorthogonal IDR(s)): `s` products, new level for `V`, `r ⊥ P` afterwards.
    fn kloop(&mut self, om: T, max_mv: usize) -> Result<()> {
        let s = self.s;
        let n = self.b.len();
        self.refresh_f();
        for k in 0..s {
            if self.rec.mv() >= max_mv {
                return Ok(());
            }
            let c = lower_solve_block(&self.m, &self.f, k)?;
            let mut vv = self.r.clone();
            let mut uu = vec![T::zero(); n];
            for (i, ci) in c.iter().enumerate() {
                axpy(-*ci, self.v.col(k + i), &mut vv);
                axpy(*ci, self.u.col(k + i), &mut uu);
            }
            axpy(om, &vv, &mut uu);
            let mut g = self.a.apply(&uu);
            for i in 0..k {
                let alpha = dot(self.p.col(i), &g) / self.m[(i, i)];
                axpy(-alpha, self.v.col(i), &mut g);
                axpy(-alpha, self.u.col(i), &mut uu);
            }
            for i in k..s {
                self.m[(i, k)] = dot(self.p.col(i), &g);
            }
            let mkk = self.m[(k, k)];
            if mkk.modulus() <= breakdown_tol::<T::Real>() * norm2(&g) {
                return Err(LinalgError::Breakdown { step: k, what: "IDR auxiliary pivot pᴴv" }.into());
            }
            let beta = self.f[k] / mkk;
            axpy(-beta, &g, &mut self.r);
            axpy(beta, &uu, &mut self.x);
            for i in k + 1..s {
                let mik = self.m[(i, k)];
                self.f[i] -= beta * mik;
            }
            self.f[k] = T::zero();
            self.v.set_col(k, &g);
            self.u.set_col(k, &uu);
            self.rec.step(&self.x);
            if self.check() {
                return Ok(());
            }
        }
        Ok(())
    }

    fn omega_step_recycled(&mut self, om: T) {
        let r = self.r.clone();
        axpy(om, &r, &mut self.x);
        let ax = self.a.apply(&self.x);
        self.r = self.b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
        self.rec.step(&self.x);
    }

    fn omega_step_fresh(&mut self, policy: &RelaxPolicy, forced: Option<T>) -> T {
        let t = self.a.apply(&self.r);
        let om = match (forced, policy) {
            (Some(w), _) => w,
            (None, RelaxPolicy::Richardson { lambda_min, lambda_max }) => T::lit(2.0 / (lambda_min + lambda_max)),
            (None, RelaxPolicy::Fixed(w)) => T::lit(*w),
            (None, _) => {
                let tt = dot(&t, &t);
                let ratio = norm2(&self.r) / norm2(&t);
                let w = if tt.modulus() > T::Real::zero() { dot(&t, &self.r) / tt } else { T::zero() };
                if w.modulus() <= breakdown_tol::<T::Real>() * ratio || !w.finite() {
                    self.notes.push("omega fallback to ‖r‖/‖Ar‖".into());
                    T::from_real(ratio)
                } else {
                    w
                }
            }
        };
        let r = self.r.clone();
        axpy(om, &r, &mut self.x);
        axpy(-om, &t, &mut self.r);
        self.rec.step(&self.x);
        om
    }
}

/// Solves `L·c = f` for the trailing block `M[k.., k..]` (lower triangular).
fn lower_solve_block<T: Scalar>(m: &Mat<T>, f: &[T], k: usize) -> Result<Vec<T>> {
    let s = m.nrows();
    let mut c = vec![T::zero(); s - k];
    for i in k..s {
        let mut acc = f[i];
        for j in k..i {
            acc -= m[(i, j)] * c[j - k];
        }
        let d = m[(i, i)];
        if d == T::zero() {
            return Err(LinalgError::Breakdown { step: i, what: "PᴴV singular (consider throw_columns)" }.into());
        }
        c[i - k] = acc / d;
    }
    Ok(c)
}

fn lower_solve<T: Scalar>(m: &Mat<T>, f: &[T], k: usize) -> Result<Vec<T>> {
    lower_solve_block(m, f, k)
}

/// Rewrites `V, U` so that `PᴴV = I`.
pub(crate) fn normalize_aux<T: Scalar>(p: &Mat<T>, v: &Mat<T>, u: &Mat<T>) -> Result<(Mat<T>, Mat<T>)> {
    let m = p.adj_matmul(v);
    let lu = DenseLu::new(&m)
        .map_err(|_| LinalgError::Breakdown { step: 0, what: "PᴴV singular (consider throw_columns)" })?;
    let s = m.nrows();
    // X = M⁻¹ column by column, then V·X, U·X
    let mut inv = Mat::zeros(s, s);
    for j in 0..s {
        let mut e = vec![T::zero(); s];
        e[j] = T::one();
        inv.set_col(j, &lu.solve(&e));
    }
    Ok((v.matmul(&inv), u.matmul(&inv)))
}

/// Shared cycle driver for IDR(s), SRIDR and the comparison variant.
pub(crate) fn run_engine<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    setup: EngineSetup<T>,
) -> Result<(SolveReport<T>, Option<SonneveldRecycleData<T>>)> {
    let n = b.len();
    let opts = setup.opts.clone();
    let s = opts.s;
    if s == 0 || setup.p.ncols() != s || setup.p.nrows() != n {
        return Err(LinalgError::Invalid(format!("shadow space must be {n}×{s}")).into());
    }
    let recycled = setup.recycled.clone();
    let jstar = recycled.len();
    let (v, u, m) = if setup.initial_kloop {
        (Mat::zeros(n, s), Mat::zeros(n, s), Mat::identity(s))
    } else {
        let (v, u) = normalize_aux(&setup.p, &setup.v, &setup.u)?;
        (v, u, Mat::identity(s))
    };
    let bnorm = norm2(b);
    let mut e = Engine {
        a,
        b,
        s,
        p: setup.p.clone(),
        v,
        u,
        m,
        x: vec![T::zero(); n],
        r: b.to_vec(),
        f: vec![T::zero(); s],
        thresh: real::<T>(opts.tol) * bnorm,
        rec: Recorder::new(a, b),
        rd: 0,
        notes: Vec::new(),
        replacements: 0,
        done: false,
    };
    let mut level_omegas: Vec<T> = Vec::new();
    let mut snapshot: Option<(SonneveldRecycleData<T>, usize)> = None;
    let take_snapshot = |e: &Engine<'_, T, O>, omegas: &[T], lvl: usize| SonneveldRecycleData {
        p: e.p.clone(),
        v_aux: e.v.clone(),
        u_aux: e.u.clone(),
        omegas: omegas[..lvl].to_vec(),
        jstar: lvl,
        seed: opts.seed,
    };

    if bnorm == T::Real::zero() {
        e.done = true;
    }
    if setup.initial_kloop && !e.done {
        e.rd += s;
        e.kloop(T::one(), opts.max_mv)?;
        if !e.done && opts.capture == Capture::Max {
            snapshot = Some((take_snapshot(&e, &level_omegas, 0), e.rec.mv()));
        }
        if !e.done && opts.capture == Capture::At(0) {
            snapshot = Some((take_snapshot(&e, &level_omegas, 0), e.rec.mv()));
            e.replace();
        }
    }
    let mut forced = setup.forced.clone().into_iter();
    let mut cycles = 0usize;
    let mut steps_level = 0usize; // level of the residual
    let mut last_was_recycled = false;
    while !e.done {
        e.project()?;
        if e.check() || e.rec.mv() >= opts.max_mv {
            break;
        }
        if let Some(jmax) = setup.max_cycles {
            if steps_level >= jmax {
                break;
            }
        }
        cycles += 1;
        let use_recycled = steps_level < jstar && !(opts.policy == RelaxPolicy::Alternating && last_was_recycled);
        if use_recycled {
            let om = recycled[steps_level];
            e.omega_step_recycled(om);
            e.rd += s;
            steps_level += 1;
            last_was_recycled = true;
            level_omegas.push(om);
            if e.check() {
                break;
            }
            continue;
        }
        let arbitrary = steps_level < jstar;
        let pol = if arbitrary { RelaxPolicy::OmegaOpt } else { opts.policy.clone() };
        let om = e.omega_step_fresh(&pol, if arbitrary { None } else { forced.next() });
        last_was_recycled = false;
        if arbitrary {
            if e.check() {
                break;
            }
            continue;
        }
        e.rd += s;
        steps_level += 1;
        level_omegas.push(om);
        if e.check() {
            break;
        }
        if e.rec.mv() >= opts.max_mv {
            break;
        }
        e.kloop(om, opts.max_mv)?;
        if e.done {
            break;
        }
        let level = steps_level;
        match opts.capture {
            Capture::Max => snapshot = Some((take_snapshot(&e, &level_omegas, level), e.rec.mv())),
            Capture::At(js) if js == level => {
                snapshot = Some((take_snapshot(&e, &level_omegas, level), e.rec.mv()));
                e.replace();
            }
            _ => {}
        }
        if opts.replace_every > 0 && cycles % opts.replace_every == 0 {
            e.replace();
        }
        e.rec.record(&e.x);
    }
    if let Some((_, mv)) = &snapshot {
        e.rec.markers_push(*mv, Marker::Capture);
    }
    e.rec.record(&e.x);
    let rd = e.rd;
    let notes = std::mem::take(&mut e.notes);
    let x = std::mem::take(&mut e.x);
    let mut rep = e.rec.finish(setup.label.clone(), x, opts.tol, rd);
    rep.notes = notes;
    rep.cycles = steps_level + setup.initial_kloop as usize;
    rep.notes.push(format!(
        "omegas={}",
        level_omegas.iter().map(|w| format!("{:.6}", w.re().to_f64())).collect::<Vec<_>>().join(" ")
    ));
    Ok((rep, snapshot.map(|s| s.0)))
}

/// Plain IDR(s) with biorthogonal auxiliary vectors.
pub fn idr_s_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    opts: &IdrOptions,
) -> Result<(SolveReport<T>, Option<SonneveldRecycleData<T>>)> {
    let n = b.len();
    let p = random_shadow(n, opts.s, opts.seed)?;
    let setup = EngineSetup {
        p,
        v: Mat::zeros(n, opts.s),
        u: Mat::zeros(n, opts.s),
        recycled: Vec::new(),
        initial_kloop: true,
        max_cycles: None,
        opts: opts.clone(),
        label: format!("idr(s={})", opts.s),
        forced: Vec::new(),
    };
    run_engine(a, b, setup)
}

/// Reuses `P` and the auxiliary vectors but picks every `ω` afresh and keeps the auxiliary loop.
pub fn mi09_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    recycle: Option<&SonneveldRecycleData<T>>,
    opts: &IdrOptions,
) -> Result<SolveReport<T>> {
    let Some(rec) = recycle else {
        let (mut rep, _) = idr_s_solve(a, b, opts)?;
        rep.method = format!("mi09(s={})", opts.s);
        return Ok(rep);
    };
    let setup = EngineSetup {
        p: rec.p.clone(),
        v: rec.v_aux.clone(),
        u: rec.u_aux.clone(),
        recycled: Vec::new(),
        initial_kloop: false,
        max_cycles: None,
        opts: IdrOptions { capture: Capture::None, ..opts.clone() },
        label: format!("mi09(s={})", opts.s),
        forced: Vec::new(),
    };
    Ok(run_engine(a, b, setup)?.0)
}
