use std::fs;
use std::io::Write;
use std::path::Path;

use num_traits::FromPrimitive;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::scalar::{RealScalar, Scalar};

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Complex,
    Pattern,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
    Hermitian,
}

pub fn read_matrix_market<T: Scalar>(path: impl AsRef<Path>) -> Result<CsrMatrix<T>> {
    let text = fs::read_to_string(path)?;
    parse_matrix_market(&text)
}

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn num<R: RealScalar>(tok: Option<&str>, line: usize) -> Result<R> {
    let s = tok.ok_or_else(|| perr(format!("line {line}: missing value")))?;
    let v: f64 = s.parse().map_err(|_| perr(format!("line {line}: bad number '{s}'")))?;
    Ok(<R as FromPrimitive>::from_f64(v).unwrap())
}

fn index(tok: Option<&str>, bound: usize, line: usize) -> Result<usize> {
    let s = tok.ok_or_else(|| perr(format!("line {line}: missing index")))?;
    let v: usize = s.parse().map_err(|_| perr(format!("line {line}: bad index '{s}'")))?;
    if v == 0 || v > bound {
        return Err(perr(format!("line {line}: index {v} outside 1..={bound}")));
    }
    Ok(v - 1)
}

pub fn parse_matrix_market<T: Scalar>(text: &str) -> Result<CsrMatrix<T>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| perr("empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(perr(format!("malformed header '{header}'")));
    }
    let coordinate = match h[2].as_str() {
        "coordinate" => true,
        "array" => false,
        f => return Err(perr(format!("unknown format '{f}'"))),
    };
    let field = match h[3].as_str() {
        "real" | "double" | "integer" => Field::Real,
        "complex" => Field::Complex,
        "pattern" if coordinate => Field::Pattern,
        f => return Err(perr(format!("unsupported field '{f}'"))),
    };
    let sym = match h[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        "hermitian" => Symmetry::Hermitian,
        s => return Err(perr(format!("unsupported symmetry '{s}'"))),
    };
    if field == Field::Complex && !T::IS_COMPLEX {
        return Err(perr("complex matrix requested as a real type"));
    }
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sl, size_line) = body.next().ok_or_else(|| perr("missing size line"))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| perr(format!("line {}: bad size line", sl + 1))))
        .collect::<Result<_>>()?;
    let (nr, nc, nnz) = match (coordinate, dims.as_slice()) {
        (true, [r, c, z]) => (*r, *c, *z),
        (false, [r, c]) => (*r, *c, r * c),
        _ => return Err(perr(format!("line {}: bad size line", sl + 1))),
    };
    if sym != Symmetry::General && nr != nc {
        return Err(perr("symmetric storage requires a square matrix"));
    }

    let read_val = |toks: &mut std::str::SplitWhitespace, ln: usize| -> Result<T> {
        Ok(match field {
            Field::Pattern => T::one(),
            Field::Real => T::from_real(num(toks.next(), ln)?),
            Field::Complex => {
                let re = num(toks.next(), ln)?;
                let im = num(toks.next(), ln)?;
                T::from_parts(re, im).expect("complex type checked above")
            }
        })
    };

    let mut trip = Vec::with_capacity(if sym == Symmetry::General { nnz } else { 2 * nnz });
    let mut push = |r: usize, c: usize, v: T| {
        trip.push((r, c, v));
        if r != c {
            match sym {
                Symmetry::General => {}
                Symmetry::Symmetric => trip.push((c, r, v)),
                Symmetry::Skew => trip.push((c, r, -v)),
                Symmetry::Hermitian => trip.push((c, r, v.conj())),
            }
        }
    };
    let mut count = 0;
    if coordinate {
        for (ln, line) in body.by_ref() {
            if count == nnz {
                return Err(perr(format!("line {}: more than {nnz} entries", ln + 1)));
            }
            let mut toks = line.split_whitespace();
            let r = index(toks.next(), nr, ln + 1)?;
            let c = index(toks.next(), nc, ln + 1)?;
            let v = read_val(&mut toks, ln + 1)?;
            push(r, c, v);
            count += 1;
        }
    } else {
        // column-major; symmetric variants list the lower triangle only
        let mut cells = Vec::new();
        for c in 0..nc {
            let start = if sym == Symmetry::General { 0 } else if sym == Symmetry::Skew { c + 1 } else { c };
            for r in start..nr {
                cells.push((r, c));
            }
        }
        let mut it = cells.into_iter();
        for (ln, line) in body.by_ref() {
            let (r, c) = it.next().ok_or_else(|| perr(format!("line {}: too many array entries", ln + 1)))?;
            let mut toks = line.split_whitespace();
            let v = read_val(&mut toks, ln + 1)?;
            if v != T::zero() {
                push(r, c, v);
            }
            count += 1;
        }
        if it.next().is_some() {
            return Err(perr(format!("array data ends after {count} entries")));
        }
    }
    if coordinate && count != nnz {
        return Err(perr(format!("header announces {nnz} entries, found {count}")));
    }
    Ok(CsrMatrix::from_triplets(nr, nc, &trip)?)
}

/// Coordinate/general output with round-trip exact numbers.
pub fn write_matrix_market_to<T: Scalar, W: Write>(a: &CsrMatrix<T>, mut w: W) -> Result<()> {
    let field = if T::IS_COMPLEX { "complex" } else { "real" };
    writeln!(w, "%%MatrixMarket matrix coordinate {field} general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for r in 0..a.nrows() {
        for (c, v) in a.row(r) {
            if T::IS_COMPLEX {
                writeln!(w, "{} {} {:e} {:e}", r + 1, c + 1, v.re().to_f64(), v.im().to_f64())?;
            } else {
                writeln!(w, "{} {} {:e}", r + 1, c + 1, v.re().to_f64())?;
            }
        }
    }
    Ok(())
}

pub fn write_matrix_market<T: Scalar>(a: &CsrMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let f = std::io::BufWriter::new(fs::File::create(path)?);
    write_matrix_market_to(a, f)
}
