//! Binary payload containers.
//!
//! Every container starts with a five byte magic (`SRID1`, `SREP1`, `SBLK1`)
//! and a scalar-kind byte. Integers are little-endian `u64`, reals `f64`,
//! matrices column-major. Complex scalars store `re` then `im`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::blocking::{BlockedRecycleData, Boundary, RecycleBlock};
use crate::error::{Error, Result};
use crate::linalg::{BandedUpperTriangular, Mat, PermutationMap, TriBand};
use crate::scalar::{Scalar, ScalarKind};
use crate::shortrep::{OpSide, ShortRepresentation};
use crate::solvers::Approach;
use crate::sridr::SonneveldRecycleData;

pub const MAGIC_SRID: &[u8; 5] = b"SRID1";
pub const MAGIC_SREP: &[u8; 5] = b"SREP1";
pub const MAGIC_SBLK: &[u8; 5] = b"SBLK1";

// guards against absurd allocations from corrupt headers
const MAX_ELEMS: u64 = 1 << 34;

fn bad(msg: impl Into<String>) -> Error {
    Error::Payload(msg.into())
}

fn header<T: Scalar, W: Write>(w: &mut W, magic: &[u8; 5]) -> Result<()> {
    w.write_all(magic)?;
    w.write_u8(T::KIND as u8)?;
    Ok(())
}

fn check_header<T: Scalar, R: Read>(r: &mut R, magic: &[u8; 5]) -> Result<()> {
    let mut m = [0u8; 5];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(bad(format!("expected magic {}, found {:?}", String::from_utf8_lossy(magic), String::from_utf8_lossy(&m))));
    }
    let k = r.read_u8()?;
    match ScalarKind::from_u8(k) {
        Some(kind) if kind == T::KIND => Ok(()),
        Some(kind) => Err(bad(format!("payload holds {kind:?}, requested {:?}", T::KIND))),
        None => Err(bad(format!("unknown scalar kind {k}"))),
    }
}

/// Reads the scalar kind of any container without decoding it.
pub fn peek_kind(path: &Path) -> Result<([u8; 5], ScalarKind)> {
    let mut f = File::open(path)?;
    let mut m = [0u8; 5];
    f.read_exact(&mut m)?;
    let k = f.read_u8()?;
    let kind = ScalarKind::from_u8(k).ok_or_else(|| bad(format!("unknown scalar kind {k}")))?;
    Ok((m, kind))
}

fn put_u64<W: Write>(w: &mut W, v: usize) -> Result<()> {
    w.write_u64::<LittleEndian>(v as u64)?;
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<usize> {
    let v = r.read_u64::<LittleEndian>()?;
    if v > MAX_ELEMS {
        return Err(bad(format!("size field {v} out of range")));
    }
    Ok(v as usize)
}

fn put_vec<T: Scalar, W: Write>(w: &mut W, v: &[T]) -> Result<()> {
    put_u64(w, v.len())?;
    for x in v {
        x.write_le(w)?;
    }
    Ok(())
}

fn get_vec<T: Scalar, R: Read>(r: &mut R) -> Result<Vec<T>> {
    let n = get_u64(r)?;
    get_n(r, n)
}

fn get_n<T: Scalar, R: Read>(r: &mut R, n: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        out.push(T::read_le(r)?);
    }
    Ok(out)
}

fn put_mat<T: Scalar, W: Write>(w: &mut W, m: &Mat<T>) -> Result<()> {
    put_u64(w, m.nrows())?;
    put_u64(w, m.ncols())?;
    for x in m.as_slice() {
        x.write_le(w)?;
    }
    Ok(())
}

fn get_mat<T: Scalar, R: Read>(r: &mut R) -> Result<Mat<T>> {
    let rows = get_u64(r)?;
    let cols = get_u64(r)?;
    let len = rows.checked_mul(cols).filter(|l| (*l as u64) <= MAX_ELEMS).ok_or_else(|| bad("matrix too large"))?;
    Ok(Mat::from_col_major(rows, cols, get_n(r, len)?))
}

fn put_opt<T: Scalar, W: Write>(w: &mut W, v: Option<&[T]>) -> Result<()> {
    match v {
        Some(v) => {
            w.write_u8(1)?;
            put_vec(w, v)
        }
        None => Ok(w.write_u8(0)?),
    }
}

fn get_opt<T: Scalar, R: Read>(r: &mut R) -> Result<Option<Vec<T>>> {
    match r.read_u8()? {
        0 => Ok(None),
        1 => Ok(Some(get_vec(r)?)),
        f => Err(bad(format!("bad option flag {f}"))),
    }
}

fn approach_byte(a: Approach) -> u8 {
    match a {
        Approach::V => 0,
        Approach::U => 1,
    }
}

/// Writes an IDR recycling payload: `(N, s, J*)`, seed, `P`, `V`, `U`, `ω`.
pub fn write_srid<T: Scalar, W: Write>(w: &mut W, d: &SonneveldRecycleData<T>) -> Result<()> {
    header::<T, _>(w, MAGIC_SRID)?;
    put_u64(w, d.n())?;
    put_u64(w, d.s())?;
    put_u64(w, d.jstar)?;
    w.write_u64::<LittleEndian>(d.seed)?;
    for m in [&d.p, &d.v_aux, &d.u_aux] {
        put_mat(w, m)?;
    }
    put_vec(w, &d.omegas)
}

pub fn read_srid<T: Scalar, R: Read>(r: &mut R) -> Result<SonneveldRecycleData<T>> {
    check_header::<T, _>(r, MAGIC_SRID)?;
    let n = get_u64(r)?;
    let s = get_u64(r)?;
    let jstar = get_u64(r)?;
    let seed = r.read_u64::<LittleEndian>()?;
    let p = get_mat(r)?;
    let v_aux = get_mat(r)?;
    let u_aux = get_mat(r)?;
    for m in [&p, &v_aux, &u_aux] {
        if m.nrows() != n || m.ncols() != s {
            return Err(bad(format!("block is {}x{}, header says {n}x{s}", m.nrows(), m.ncols())));
        }
    }
    let omegas = get_vec(r)?;
    Ok(SonneveldRecycleData { p, v_aux, u_aux, omegas, jstar, seed })
}

/// Writes a short representation: `(N, n, J, k)`, side, `Ṽ`, `K` band, `Π`,
/// optional next column, recursion band.
pub fn write_srep<T: Scalar, W: Write>(w: &mut W, rep: &ShortRepresentation<T>) -> Result<()> {
    header::<T, _>(w, MAGIC_SREP)?;
    put_u64(w, rep.vtilde.nrows())?;
    put_u64(w, rep.n)?;
    put_u64(w, rep.stride)?;
    put_u64(w, rep.vtilde.ncols())?;
    w.write_u8(match rep.side {
        OpSide::A => 0,
        OpSide::Adjoint => 1,
    })?;
    w.write_f64::<LittleEndian>(rep.source_defect)?;
    put_mat(w, &rep.vtilde)?;
    put_u64(w, rep.k.n())?;
    put_u64(w, rep.k.upper_bandwidth())?;
    put_vec(w, rep.k.entries())?;
    put_u64(w, rep.pi.len())?;
    for &i in rep.pi.forward() {
        put_u64(w, i)?;
    }
    put_opt(w, rep.last_col.as_deref())?;
    put_vec(w, &rep.band.diag)?;
    put_vec(w, &rep.band.sub)?;
    put_vec(w, &rep.band.sup)
}

pub fn read_srep<T: Scalar, R: Read>(r: &mut R) -> Result<ShortRepresentation<T>> {
    check_header::<T, _>(r, MAGIC_SREP)?;
    let big_n = get_u64(r)?;
    let n = get_u64(r)?;
    let stride = get_u64(r)?;
    let k = get_u64(r)?;
    let side = match r.read_u8()? {
        0 => OpSide::A,
        1 => OpSide::Adjoint,
        f => return Err(bad(format!("bad side flag {f}"))),
    };
    let source_defect = r.read_f64::<LittleEndian>()?;
    let vtilde = get_mat(r)?;
    if vtilde.nrows() != big_n || vtilde.ncols() != k {
        return Err(bad("stored columns disagree with header"));
    }
    if stride == 0 || n.div_ceil(stride) != k {
        return Err(bad(format!("k = {k} inconsistent with n = {n}, J = {stride}")));
    }
    let kn = get_u64(r)?;
    let ub = get_u64(r)?;
    let entries = get_vec(r)?;
    let kmat = BandedUpperTriangular::from_entries(kn, ub, entries)?;
    let plen = get_u64(r)?;
    let mut fwd = Vec::with_capacity(plen.min(1 << 20));
    for _ in 0..plen {
        fwd.push(get_u64(r)?);
    }
    let pi = PermutationMap::new(fwd)?;
    if kn != n || plen != n {
        return Err(bad("K or Π size disagrees with n"));
    }
    let last_col = get_opt(r)?;
    if last_col.as_ref().is_some_and(|c| c.len() != big_n) {
        return Err(bad("next column has wrong length"));
    }
    let band = TriBand { diag: get_vec(r)?, sub: get_vec(r)?, sup: get_vec(r)? };
    Ok(ShortRepresentation { vtilde, k: kmat, pi, n, stride, last_col, band, side, source_defect })
}

/// Writes blocked data: approach, total `n`, block count, then per block
/// `n_i`, defect, two `SREP1` payloads and the boundary vectors.
pub fn write_sblk<T: Scalar, W: Write>(w: &mut W, d: &BlockedRecycleData<T>) -> Result<()> {
    header::<T, _>(w, MAGIC_SBLK)?;
    w.write_u8(approach_byte(d.approach))?;
    put_u64(w, d.total_n)?;
    put_u64(w, d.blocks.len())?;
    for b in &d.blocks {
        put_u64(w, b.n_i)?;
        w.write_f64::<LittleEndian>(b.biortho_defect)?;
        write_srep(w, &b.rep_main)?;
        write_srep(w, &b.rep_w)?;
        put_opt(w, b.boundary.u_last.as_deref())?;
        put_vec(w, &b.boundary.v_last)?;
        put_vec(w, &b.boundary.w_last)?;
        put_vec(w, &b.boundary.w_tilde_last)?;
    }
    Ok(())
}

pub fn read_sblk<T: Scalar, R: Read>(r: &mut R) -> Result<BlockedRecycleData<T>> {
    check_header::<T, _>(r, MAGIC_SBLK)?;
    let approach = match r.read_u8()? {
        0 => Approach::V,
        1 => Approach::U,
        f => return Err(bad(format!("bad approach flag {f}"))),
    };
    let total_n = get_u64(r)?;
    let l = get_u64(r)?;
    let mut blocks = Vec::with_capacity(l.min(1024));
    for _ in 0..l {
        let n_i = get_u64(r)?;
        let biortho_defect = r.read_f64::<LittleEndian>()?;
        let rep_main = read_srep(r)?;
        let rep_w = read_srep(r)?;
        let boundary = Boundary { u_last: get_opt(r)?, v_last: get_vec(r)?, w_last: get_vec(r)?, w_tilde_last: get_vec(r)? };
        blocks.push(RecycleBlock { rep_main, rep_w, n_i, boundary, biortho_defect });
    }
    if blocks.iter().map(|b| b.n_i).sum::<usize>() != total_n {
        return Err(bad("block sizes do not add up"));
    }
    Ok(BlockedRecycleData { approach, blocks, total_n })
}

/// Any payload, tagged by container.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload<T: Scalar> {
    Sonneveld(SonneveldRecycleData<T>),
    Short(ShortRepresentation<T>),
    Blocked(BlockedRecycleData<T>),
}

impl<T: Scalar> Payload<T> {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        match self {
            Payload::Sonneveld(d) => write_srid(w, d),
            Payload::Short(d) => write_srep(w, d),
            Payload::Blocked(d) => write_sblk(w, d),
        }
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut head = [0u8; 5];
        r.read_exact(&mut head)?;
        let mut chained = std::io::Cursor::new(head).chain(r);
        match &head {
            m if m == MAGIC_SRID => Ok(Payload::Sonneveld(read_srid(&mut chained)?)),
            m if m == MAGIC_SREP => Ok(Payload::Short(read_srep(&mut chained)?)),
            m if m == MAGIC_SBLK => Ok(Payload::Blocked(read_sblk(&mut chained)?)),
            _ => Err(bad(format!("unknown magic {:?}", String::from_utf8_lossy(&head)))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(&mut BufReader::new(File::open(path)?))
    }
}
