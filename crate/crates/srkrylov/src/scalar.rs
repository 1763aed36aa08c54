//! Scalar abstraction shared by every kernel in the crate.
//!
//! Real (`f32`, `f64`) and complex (`Complex32`, `Complex64`) element types are
//! supported. Inner products follow the `xᴴy` convention: the first argument is
//! conjugated.

use std::fmt::Debug;
use std::io::{self, Read, Write};
use std::iter::Sum;
use std::ops::Neg;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::StandardNormal;

/// Tag written into binary payloads so readers can reject a mismatched element type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarKind {
    F32 = 1,
    F64 = 2,
    C32 = 3,
    C64 = 4,
}

impl ScalarKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(Self::F32),
            2 => Some(Self::F64),
            3 => Some(Self::C32),
            4 => Some(Self::C64),
            _ => None,
        }
    }
}

pub trait Scalar:
    Copy + Debug + PartialEq + Send + Sync + 'static + NumAssign + Neg<Output = Self> + Sum
{
    type Real: RealScalar;
    const KIND: ScalarKind;
    const IS_COMPLEX: bool;

    fn conj(self) -> Self;
    fn re(self) -> Self::Real;
    fn im(self) -> Self::Real;
    fn modulus(self) -> Self::Real;
    fn abs_sqr(self) -> Self::Real;
    fn from_real(r: Self::Real) -> Self;
    /// `None` when `im != 0` and the type is real.
    fn from_parts(re: Self::Real, im: Self::Real) -> Option<Self>;
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn write_le<W: Write>(self, w: &mut W) -> io::Result<()>;
    fn read_le<R: Read>(r: &mut R) -> io::Result<Self>;

    /// Literal conversion from `f64`.
    fn lit(x: f64) -> Self {
        Self::from_real(<Self::Real as FromPrimitive>::from_f64(x).expect("f64 conversion"))
    }
    fn finite(self) -> bool {
        Float::is_finite(self.re()) && Float::is_finite(self.im())
    }
}

pub trait RealScalar: Scalar<Real = Self> + Float + FromPrimitive {
    fn to_f64(self) -> f64;
}

macro_rules! real_impl {
    ($t:ty, $kind:expr, $rd:ident, $wr:ident) => {
        impl Scalar for $t {
            type Real = $t;
            const KIND: ScalarKind = $kind;
            const IS_COMPLEX: bool = false;
            #[inline]
            fn conj(self) -> Self {
                self
            }
            #[inline]
            fn re(self) -> Self {
                self
            }
            #[inline]
            fn im(self) -> Self {
                0.0
            }
            #[inline]
            fn modulus(self) -> Self {
                <$t>::abs(self)
            }
            #[inline]
            fn abs_sqr(self) -> Self {
                self * self
            }
            #[inline]
            fn from_real(r: Self) -> Self {
                r
            }
            fn from_parts(re: Self, im: Self) -> Option<Self> {
                if im == 0.0 {
                    Some(re)
                } else {
                    None
                }
            }
            fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.sample::<$t, _>(StandardNormal)
            }
            fn write_le<W: Write>(self, w: &mut W) -> io::Result<()> {
                w.$wr::<LittleEndian>(self)
            }
            fn read_le<R: Read>(r: &mut R) -> io::Result<Self> {
                r.$rd::<LittleEndian>()
            }
        }
        impl RealScalar for $t {
            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

real_impl!(f32, ScalarKind::F32, read_f32, write_f32);
real_impl!(f64, ScalarKind::F64, read_f64, write_f64);

macro_rules! complex_impl {
    ($t:ty, $kind:expr) => {
        impl Scalar for Complex<$t> {
            type Real = $t;
            const KIND: ScalarKind = $kind;
            const IS_COMPLEX: bool = true;
            #[inline]
            fn conj(self) -> Self {
                Complex::conj(&self)
            }
            #[inline]
            fn re(self) -> $t {
                self.re
            }
            #[inline]
            fn im(self) -> $t {
                self.im
            }
            #[inline]
            fn modulus(self) -> $t {
                self.norm()
            }
            #[inline]
            fn abs_sqr(self) -> $t {
                self.norm_sqr()
            }
            #[inline]
            fn from_real(r: $t) -> Self {
                Complex::new(r, 0.0)
            }
            fn from_parts(re: $t, im: $t) -> Option<Self> {
                Some(Complex::new(re, im))
            }
            fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                let s = std::f64::consts::FRAC_1_SQRT_2 as $t;
                Complex::new(
                    rng.sample::<$t, _>(StandardNormal) * s,
                    rng.sample::<$t, _>(StandardNormal) * s,
                )
            }
            fn write_le<W: Write>(self, w: &mut W) -> io::Result<()> {
                self.re.write_le(w)?;
                self.im.write_le(w)
            }
            fn read_le<R: Read>(r: &mut R) -> io::Result<Self> {
                let re = <$t>::read_le(r)?;
                let im = <$t>::read_le(r)?;
                Ok(Complex::new(re, im))
            }
        }
    };
}

complex_impl!(f32, ScalarKind::C32);
complex_impl!(f64, ScalarKind::C64);

/// Relative threshold below which a pivot or normalizer counts as zero.
pub fn breakdown_tol<R: RealScalar>() -> R {
    <R as FromPrimitive>::from_f64(1e-14).unwrap()
}

#[inline]
pub fn real<T: Scalar>(x: f64) -> T::Real {
    <T::Real as FromPrimitive>::from_f64(x).unwrap()
}
