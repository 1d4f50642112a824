//! Scalar rings used throughout the crate.
//!
//! Algebraic routines (unipotent products, inversion by back substitution,
//! recurrences) are written once against [`Ring`] and instantiated with
//! floating complex numbers, exact rational complex numbers, or polynomials.
//! Numerical routines are generic over the real type `F: Real` (`f32` or
//! `f64`) and work with `Complex<F>`.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use nalgebra::{ComplexField, RealField};
use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A commutative ring with identity.
pub trait Ring:
    Clone + fmt::Debug + PartialEq + Zero + One + Neg<Output = Self> + Sub<Output = Self> + Send + Sync
{
    /// Modulus as an `f64`, if the element is a number.
    fn magnitude(&self) -> Option<f64> {
        None
    }
}

/// A ring in which every nonzero element is invertible.
pub trait Field: Ring + Div<Output = Self> {}

/// Real types backing the numerical paths.
pub trait Real: RealField + Copy {}

impl<T: RealField + Copy> Real for T {}

impl<F: Real> Ring for Complex<F> {
    fn magnitude(&self) -> Option<f64> {
        let m: F = ComplexField::modulus(*self);
        Some(nalgebra::try_convert(m).unwrap_or(f64::NAN))
    }
}

impl<F: Real> Field for Complex<F> {}

/// Converts an `f64` constant into `F`.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    nalgebra::convert(x)
}

/// Converts `F` back to `f64` (used for reports and tolerances).
#[inline]
pub fn to_f64<F: Real>(x: F) -> f64 {
    nalgebra::try_convert(x).unwrap_or(f64::NAN)
}

#[inline]
pub fn cx<F: Real>(re: f64, im: f64) -> Complex<F> {
    Complex::new(real(re), real(im))
}

#[inline]
pub fn modulus<F: Real>(z: Complex<F>) -> F {
    ComplexField::modulus(z)
}

/// Euclidean norm of a complex vector.
pub fn norm<F: Real>(v: &[Complex<F>]) -> F {
    v.iter()
        .fold(F::zero(), |acc, z| acc + ComplexField::modulus_squared(*z))
        .sqrt()
}

/// Euclidean distance of two complex vectors of equal length.
pub fn distance<F: Real>(a: &[Complex<F>], b: &[Complex<F>]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (x, y)| acc + ComplexField::modulus_squared(*x - *y))
        .sqrt()
}

/// Complex number with arbitrary precision rational parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExactComplex {
    pub re: BigRational,
    pub im: BigRational,
}

impl ExactComplex {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        ExactComplex { re, im }
    }

    pub fn from_int(re: i64) -> Self {
        ExactComplex::new(BigRational::from_integer(re.into()), BigRational::zero())
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        ExactComplex::new(
            BigRational::from_integer(re.into()),
            BigRational::from_integer(im.into()),
        )
    }

    /// `num/den` as a real value; panics on a zero denominator.
    pub fn ratio(num: i64, den: i64) -> Self {
        ExactComplex::new(
            BigRational::new(BigInt::from(num), BigInt::from(den)),
            BigRational::zero(),
        )
    }

    pub fn i() -> Self {
        ExactComplex::from_ints(0, 1)
    }

    pub fn conj(&self) -> Self {
        ExactComplex::new(self.re.clone(), -self.im.clone())
    }

    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse, `None` for zero.
    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let d = self.norm_sqr();
        Some(ExactComplex::new(&self.re / &d, -(&self.im / &d)))
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    /// Nearest floating value (each part rounded independently).
    pub fn to_complex<F: Real>(&self) -> Complex<F> {
        Complex::new(
            real(self.re.to_f64().unwrap_or(f64::NAN)),
            real(self.im.to_f64().unwrap_or(f64::NAN)),
        )
    }

    /// Exact rational value of a finite `f64` pair.
    pub fn from_f64(re: f64, im: f64) -> Option<Self> {
        Some(ExactComplex::new(
            BigRational::from_float(re)?,
            BigRational::from_float(im)?,
        ))
    }
}

/// Formats a rational as `p/q` (or `p` when the denominator is one).
pub fn rational_to_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p/q` or `p`; accepts a Unicode minus sign.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim().replace('\u{2212}', "-");
    let bad = || Error::Parse(format!("invalid rational '{s}'"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(
            BigInt::from_str(&s).map_err(|_| bad())?,
        )),
    }
}

impl fmt::Display for ExactComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", rational_to_string(&self.re)),
            (true, false) => write!(f, "{}i", rational_to_string(&self.im)),
            (false, false) => {
                let sign = if self.im.is_negative() { '-' } else { '+' };
                write!(
                    f,
                    "({}{}{}i)",
                    rational_to_string(&self.re),
                    sign,
                    rational_to_string(&self.im.abs())
                )
            }
        }
    }
}

impl Zero for ExactComplex {
    fn zero() -> Self {
        ExactComplex::new(BigRational::zero(), BigRational::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl One for ExactComplex {
    fn one() -> Self {
        ExactComplex::from_int(1)
    }
}

impl<'a> Add<&'a ExactComplex> for &'a ExactComplex {
    type Output = ExactComplex;
    fn add(self, rhs: &ExactComplex) -> ExactComplex {
        ExactComplex::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl<'a> Sub<&'a ExactComplex> for &'a ExactComplex {
    type Output = ExactComplex;
    fn sub(self, rhs: &ExactComplex) -> ExactComplex {
        ExactComplex::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl<'a> Mul<&'a ExactComplex> for &'a ExactComplex {
    type Output = ExactComplex;
    fn mul(self, rhs: &ExactComplex) -> ExactComplex {
        // Integer-valued coefficients dominate; skip work for the common real case.
        if self.im.is_zero() && rhs.im.is_zero() {
            return ExactComplex::new(&self.re * &rhs.re, BigRational::zero());
        }
        ExactComplex::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl<'a> Div<&'a ExactComplex> for &'a ExactComplex {
    type Output = ExactComplex;
    fn div(self, rhs: &ExactComplex) -> ExactComplex {
        let inv = rhs.inv().expect("division by zero ExactComplex");
        self * &inv
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for ExactComplex {
            type Output = ExactComplex;
            fn $m(self, rhs: ExactComplex) -> ExactComplex {
                (&self).$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl AddAssign<&ExactComplex> for ExactComplex {
    fn add_assign(&mut self, rhs: &ExactComplex) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&ExactComplex> for ExactComplex {
    fn sub_assign(&mut self, rhs: &ExactComplex) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl MulAssign<&ExactComplex> for ExactComplex {
    fn mul_assign(&mut self, rhs: &ExactComplex) {
        *self = &*self * rhs;
    }
}

impl Neg for ExactComplex {
    type Output = ExactComplex;
    fn neg(self) -> ExactComplex {
        ExactComplex::new(-self.re, -self.im)
    }
}

impl Neg for &ExactComplex {
    type Output = ExactComplex;
    fn neg(self) -> ExactComplex {
        ExactComplex::new(-self.re.clone(), -self.im.clone())
    }
}

impl From<i64> for ExactComplex {
    fn from(v: i64) -> Self {
        ExactComplex::from_int(v)
    }
}

impl Ring for ExactComplex {
    fn magnitude(&self) -> Option<f64> {
        let c: Complex<f64> = self.to_complex();
        Some(c.norm())
    }
}

impl Field for ExactComplex {}
