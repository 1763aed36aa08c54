//! Compressed Krylov bases: every `J`-th column plus `(K, Π)` such that
//! `V·K = [Ṽ, AṼ, …, A^{J−1}Ṽ]·Π`. Products with `V` and `Vᴴ` are evaluated
//! with Horner schemes at `J − 1` operator applications each.

mod solve;
pub(crate) use solve::tri_solve;

pub use solve::{srbicg_dual_solve, srbicg_solve, srcg_solve, srmr_solve};

use crate::error::{LinalgError, Result};
use crate::linalg::{BandedUpperTriangular, LinearOperator, Mat, PermutationMap, TriBand};
use crate::scalar::Scalar;
use crate::solvers::{BiLanczosData, LanczosData};

/// Which operator generates the represented basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpSide {
    /// `A·V = V̄·T̄`
    A,
    /// `Aᴴ·W = W̄·T̲ᴴ`
    Adjoint,
}

/// Basis selector for the Lanczos data constructors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    V,
    U,
    W,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShortRepresentation<T: Scalar> {
    /// Stored columns `1, 1+J, 1+2J, …` of the basis.
    pub vtilde: Mat<T>,
    pub k: BandedUpperTriangular<T>,
    pub pi: PermutationMap,
    pub n: usize,
    pub stride: usize,
    /// Next basis column, needed for `V̄`.
    pub last_col: Option<Vec<T>>,
    /// Recursion band of the represented basis (`n` columns plus coupling).
    pub band: TriBand<T>,
    pub side: OpSide,
    /// (Bi)orthogonality defect of the source data.
    pub source_defect: f64,
}

/// Block layout: `k` blocks of `J` columns, the last one possibly shorter.
fn layout(n: usize, stride: usize) -> (usize, usize, Vec<usize>, Vec<usize>) {
    let k = n.div_ceil(stride);
    let last = n - (k - 1) * stride;
    let cnt: Vec<usize> = (0..stride).map(|j| if j < last { k } else { k - 1 }).collect();
    let mut off = vec![0; stride];
    for j in 1..stride {
        off[j] = off[j - 1] + cnt[j - 1];
    }
    (k, last, cnt, off)
}

/// `(K, Π)` for a tridiagonal Hessenberg source, plus the multiply-add count.
pub fn build_short_rep_counted<T: Scalar>(h: &TriBand<T>, stride: usize) -> Result<(BandedUpperTriangular<T>, PermutationMap, usize)> {
    let n = h.n();
    check_stride(n, stride)?;
    let ub = (2 * (stride - 1)).min(n.saturating_sub(1));
    let mut k = BandedUpperTriangular::zeros(n, ub);
    let mut madds = 0;
    for c in 0..n {
        let head = (c / stride) * stride;
        let j = c - head;
        if j == 0 {
            k.set(c, c, T::one());
            continue;
        }
        let lo = head.saturating_sub(j - 1);
        for r in lo..c {
            let x = k.get(r, c - 1);
            if r > 0 {
                let v = k.get(r - 1, c) + h.get(r - 1, r) * x;
                k.set(r - 1, c, v);
            }
            let v = k.get(r, c) + h.get(r, r) * x;
            k.set(r, c, v);
            let v = k.get(r + 1, c) + h.get(r + 1, r) * x;
            k.set(r + 1, c, v);
            madds += 3;
        }
    }
    Ok((k, perm(n, stride)?, madds))
}

/// `(K, Π)` for a tridiagonal Hessenberg source.
pub fn build_short_rep<T: Scalar>(h: &TriBand<T>, stride: usize) -> Result<(BandedUpperTriangular<T>, PermutationMap)> {
    let (k, p, _) = build_short_rep_counted(h, stride)?;
    Ok((k, p))
}

/// `(K, Π)` for a general `n×n` upper Hessenberg matrix (dense `K`).
pub fn build_short_rep_hessenberg<T: Scalar>(h: &Mat<T>, stride: usize) -> Result<(BandedUpperTriangular<T>, PermutationMap)> {
    let n = h.ncols();
    check_stride(n, stride)?;
    let mut k = BandedUpperTriangular::zeros(n, n.saturating_sub(1));
    for c in 0..n {
        if c % stride == 0 {
            k.set(c, c, T::one());
            continue;
        }
        for r in 0..=c {
            let mut acc = T::zero();
            for q in r.saturating_sub(1)..c {
                acc += h[(r, q)] * k.get(q, c - 1);
            }
            k.set(r, c, acc);
        }
    }
    Ok((k, perm(n, stride)?))
}

fn check_stride(n: usize, stride: usize) -> Result<()> {
    if stride == 0 || n == 0 || stride > n {
        return Err(LinalgError::Invalid(format!("stride {stride} invalid for n = {n}")).into());
    }
    Ok(())
}

/// `Π·e_{iJ+j} = e_{off_j + i}`: block-major to power-major order.
fn perm(n: usize, stride: usize) -> Result<PermutationMap> {
    let (_, _, _, off) = layout(n, stride);
    let fwd = (0..n).map(|c| off[c % stride] + c / stride).collect();
    Ok(PermutationMap::new(fwd)?)
}

impl<T: Scalar> ShortRepresentation<T> {
    /// Samples every `stride`-th column of the first `n` columns of `full`.
    pub fn from_basis(
        full: &Mat<T>,
        band: &TriBand<T>,
        n: usize,
        stride: usize,
        last_col: Option<Vec<T>>,
        side: OpSide,
    ) -> Result<Self> {
        if full.ncols() < n || band.n() < n {
            return Err(LinalgError::Invalid(format!("basis has {} columns, band {}, need {n}", full.ncols(), band.n())).into());
        }
        let band = band.truncate(n);
        let (k, pi) = build_short_rep(&band, stride)?;
        let mut vtilde = Mat::zeros(full.nrows(), 0);
        for c in (0..n).step_by(stride) {
            vtilde.push_col(full.col(c));
        }
        Ok(ShortRepresentation { vtilde, k, pi, n, stride, last_col, band, side, source_defect: 0.0 })
    }

    pub fn from_bilanczos(data: &BiLanczosData<T>, basis: Basis, stride: usize) -> Result<Self> {
        let n = data.n;
        let band = data.band_n();
        let has_next = data.v.ncols() > n;
        let mut rep = match basis {
            Basis::V => Self::from_basis(&data.v, &band, n, stride, has_next.then(|| data.v_next().to_vec()), OpSide::A)?,
            Basis::U => {
                let u = data.u.as_ref().ok_or_else(|| LinalgError::Invalid("source has no preimage basis".into()))?;
                Self::from_basis(u, &band, n, stride, has_next.then(|| u.col(n).to_vec()), OpSide::A)?
            }
            Basis::W => Self::from_basis(&data.w, &band.adjoint_band(), n, stride, has_next.then(|| data.w_next().to_vec()), OpSide::Adjoint)?,
        };
        rep.source_defect = data.biortho_defect;
        Ok(rep)
    }

    pub fn from_lanczos(data: &LanczosData<T>, basis: Basis, stride: usize) -> Result<Self> {
        let n = data.n;
        let band = data.band_n();
        let has_next = data.v.ncols() > n;
        let mut rep = match basis {
            Basis::V | Basis::W => Self::from_basis(&data.v, &band, n, stride, has_next.then(|| data.v.col(n).to_vec()), OpSide::A)?,
            Basis::U => {
                let u = data.u.as_ref().ok_or_else(|| LinalgError::Invalid("source has no preimage basis".into()))?;
                let next = (u.ncols() > n).then(|| u.col(n).to_vec());
                Self::from_basis(u, &band, n, stride, next, OpSide::A)?
            }
        };
        rep.source_defect = data.ortho_defect;
        Ok(rep)
    }

    /// Number of stored columns.
    pub fn k_blocks(&self) -> usize {
        self.vtilde.ncols()
    }

    pub fn dim(&self) -> usize {
        self.vtilde.nrows()
    }

    fn step<O: LinearOperator<T> + ?Sized>(&self, a: &O, x: &[T], adjoint: bool, counted: bool) -> Result<Vec<T>> {
        let use_adj = adjoint ^ (self.side == OpSide::Adjoint);
        Ok(match (use_adj, counted) {
            (false, true) => a.apply(x),
            (false, false) => a.apply_silent(x),
            (true, true) => a.apply_adjoint(x)?,
            (true, false) => a.adjoint_silent(x).ok_or(LinalgError::NoAdjoint)?,
        })
    }

    fn horner_v<O: LinearOperator<T> + ?Sized>(&self, a: &O, y: &[T], counted: bool) -> Result<Vec<T>> {
        if y.len() != self.n {
            return Err(LinalgError::DimensionMismatch { expected: self.n, found: y.len() }.into());
        }
        let (_, _, cnt, off) = layout(self.n, self.stride);
        let yt = self.pi.apply(&self.k.solve(y)?);
        let part = |j: usize| -> Vec<T> {
            let mut c = vec![T::zero(); self.k_blocks()];
            c[..cnt[j]].copy_from_slice(&yt[off[j]..off[j] + cnt[j]]);
            self.vtilde.mul_vec(&c)
        };
        let mut z = part(self.stride - 1);
        for j in (0..self.stride - 1).rev() {
            z = self.step(a, &z, false, counted)?;
            let p = part(j);
            z.iter_mut().zip(&p).for_each(|(a, b)| *a += *b);
        }
        Ok(z)
    }

    fn horner_vh<O: LinearOperator<T> + ?Sized>(&self, a: &O, z: &[T], counted: bool) -> Result<Vec<T>> {
        if z.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch { expected: self.dim(), found: z.len() }.into());
        }
        let (_, _, cnt, off) = layout(self.n, self.stride);
        let mut c = vec![T::zero(); self.n];
        let mut t = z.to_vec();
        for j in 0..self.stride {
            let d = self.vtilde.adj_mul_vec(&t);
            c[off[j]..off[j] + cnt[j]].copy_from_slice(&d[..cnt[j]]);
            if j + 1 < self.stride {
                t = self.step(a, &t, true, counted)?;
            }
        }
        Ok(self.k.solve_adjoint(&self.pi.apply_transpose(&c))?)
    }

    /// `V·y` with `J − 1` counted products.
    pub fn apply_v<O: LinearOperator<T> + ?Sized>(&self, a: &O, y: &[T]) -> Result<Vec<T>> {
        self.horner_v(a, y, true)
    }

    /// `Vᴴ·z` with `J − 1` counted adjoint products.
    pub fn apply_vh<O: LinearOperator<T> + ?Sized>(&self, a: &O, z: &[T]) -> Result<Vec<T>> {
        self.horner_vh(a, z, true)
    }

    pub fn apply_v_silent<O: LinearOperator<T> + ?Sized>(&self, a: &O, y: &[T]) -> Result<Vec<T>> {
        self.horner_v(a, y, false)
    }

    pub fn apply_vh_silent<O: LinearOperator<T> + ?Sized>(&self, a: &O, z: &[T]) -> Result<Vec<T>> {
        self.horner_vh(a, z, false)
    }

    /// `V̄ᴴ·z` (length `n + 1`); requires `last_col`.
    pub fn apply_vbar_h<O: LinearOperator<T> + ?Sized>(&self, a: &O, z: &[T]) -> Result<Vec<T>> {
        let coupling = self.band.get(self.n, self.n - 1);
        let next = match &self.last_col {
            Some(last) => crate::linalg::dot(last, z),
            // invariant subspace: the next column does not contribute
            None if coupling == T::zero() => T::zero(),
            None => return Err(LinalgError::Invalid("representation has no next column".into()).into()),
        };
        let mut c = self.apply_vh(a, z)?;
        c.push(next);
        Ok(c)
    }

    /// Explicit `[Ṽ, AṼ, …, A^{J−1}Ṽ]` in power-major order (oracle use, silent).
    pub fn block_krylov_matrix<O: LinearOperator<T> + ?Sized>(&self, a: &O) -> Result<Mat<T>> {
        let (_, _, cnt, _) = layout(self.n, self.stride);
        let mut out = Mat::zeros(self.dim(), 0);
        let mut cur = self.vtilde.clone();
        for j in 0..self.stride {
            for i in 0..cnt[j] {
                out.push_col(cur.col(i));
            }
            if j + 1 < self.stride {
                let mut next = Mat::zeros(self.dim(), 0);
                for i in 0..cur.ncols() {
                    next.push_col(&self.step(a, cur.col(i), false, false)?);
                }
                cur = next;
            }
        }
        Ok(out)
    }
}
