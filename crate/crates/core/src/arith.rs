//! Working-precision scalars: a precision newtype, a rectangular complex
//! type over MPFR floats, and the error-bound conventions shared by every
//! evaluator in the crate.
//!
//! Error bounds are carried as low-precision [`Float`]s rounded upward so
//! that they can be arbitrarily small without underflow.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rug::float::{Constant, Round};
use rug::ops::{AddAssignRound, MulAssignRound};
use rug::Float;

use crate::error::{Error, Result};

/// Precision used for error bounds.
pub const ERR_BITS: u32 = 64;

/// Binary digits of working precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Precision(u32);

impl Precision {
    pub const MIN_BITS: u32 = 64;
    pub const DEFAULT: Precision = Precision(256);

    pub fn new(bits: u32) -> Result<Self> {
        if bits < Self::MIN_BITS {
            return Err(Error::invalid(format!(
                "precision must be at least {} bits, got {bits}",
                Self::MIN_BITS
            )));
        }
        Ok(Precision(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn doubled(self) -> Self {
        Precision(self.0.saturating_mul(2))
    }

    /// The larger of `self` and `bits`.
    pub fn at_least(self, bits: u32) -> Self {
        Precision(self.0.max(bits))
    }

    /// Unit roundoff 2^(1-bits), as an error bound.
    pub fn epsilon(self) -> Float {
        Float::with_val(ERR_BITS, Float::u_exp(1, 1 - self.0 as i32))
    }

    /// Decimal digits needed to print a value at this precision.
    pub fn decimal_digits(self) -> usize {
        (f64::from(self.0) * std::f64::consts::LOG10_2).ceil() as usize + 1
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} bits", self.0)
    }
}

/// A value together with a bound on its absolute error.
#[derive(Clone, Debug)]
pub struct SeriesValue<T> {
    pub value: T,
    pub err: Float,
}

impl<T> SeriesValue<T> {
    pub fn new(value: T, err: Float) -> Self {
        SeriesValue { value, err }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> SeriesValue<U> {
        SeriesValue {
            value: f(self.value),
            err: self.err,
        }
    }
}

impl SeriesValue<Complex> {
    pub fn exact(value: Complex) -> Self {
        SeriesValue {
            value,
            err: err_zero(),
        }
    }
}

impl SeriesValue<Float> {
    pub fn exact_real(value: Float) -> Self {
        SeriesValue {
            value,
            err: err_zero(),
        }
    }
}

pub fn err_zero() -> Float {
    Float::new(ERR_BITS)
}

/// |x| rounded up to [`ERR_BITS`].
pub fn err_up(x: &Float) -> Float {
    let (mut e, _) = Float::with_val_round(ERR_BITS, &*x.as_abs(), Round::Up);
    if e.is_nan() {
        e = Float::with_val(ERR_BITS, rug::float::Special::Infinity);
    }
    e
}

pub fn err_f64(x: f64) -> Float {
    Float::with_val(ERR_BITS, x.abs())
}

/// Sum of error bounds, rounded up.
pub fn err_sum<'a>(parts: impl IntoIterator<Item = &'a Float>) -> Float {
    let mut acc = err_zero();
    for p in parts {
        acc.add_assign_round(p, Round::Up);
    }
    acc
}

/// Product of error bounds (or of a bound and a magnitude), rounded up.
pub fn err_mul(a: &Float, b: &Float) -> Float {
    let mut r = err_up(a);
    r.mul_assign_round(err_up(b), Round::Up);
    r
}

pub fn pi(prec: Precision) -> Float {
    Float::with_val(prec.bits(), Constant::Pi)
}

pub fn real(prec: Precision, x: f64) -> Float {
    Float::with_val(prec.bits(), x)
}

/// Parses a decimal string at the given precision.
pub fn parse_real(prec: Precision, s: &str) -> Result<Float> {
    let parsed = Float::parse(s.trim())
        .map_err(|e| Error::invalid(format!("cannot parse {s:?} as a real: {e}")))?;
    let v = Float::with_val(prec.bits(), parsed);
    if !v.is_finite() {
        return Err(Error::invalid(format!("non-finite value {s:?}")));
    }
    Ok(v)
}

/// Formats `x` in scientific notation with the digit count of `prec`.
pub fn format_real(x: &Float, prec: Precision) -> String {
    x.to_string_radix(10, Some(prec.decimal_digits()))
}

/// Formats an error bound with a handful of significant digits.
pub fn format_err(e: &Float) -> String {
    e.to_string_radix(10, Some(6))
}

/// Complex number in rectangular form over MPFR floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Complex {
    pub re: Float,
    pub im: Float,
}

impl Complex {
    pub fn new(re: Float, im: Float) -> Self {
        Complex { re, im }
    }

    pub fn zero(prec: Precision) -> Self {
        Complex::new(Float::new(prec.bits()), Float::new(prec.bits()))
    }

    pub fn one(prec: Precision) -> Self {
        Complex::from_real(Float::with_val(prec.bits(), 1))
    }

    pub fn from_real(re: Float) -> Self {
        let im = Float::new(re.prec());
        Complex { re, im }
    }

    pub fn from_f64(prec: Precision, re: f64, im: f64) -> Self {
        Complex::new(real(prec, re), real(prec, im))
    }

    /// e^{iθ}.
    pub fn unit(theta: &Float) -> Self {
        let (s, c) = theta.clone().sin_cos(Float::new(theta.prec()));
        Complex::new(c, s)
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Complex::new(self.re.clone(), Float::with_val(self.im.prec(), -&self.im))
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        let mut n = Float::with_val(p, self.re.square_ref());
        n += Float::with_val(p, self.im.square_ref());
        n
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn scale(&self, s: &Float) -> Self {
        let p = self.prec();
        Complex::new(
            Float::with_val(p, &self.re * s),
            Float::with_val(p, &self.im * s),
        )
    }

    pub fn recip(&self) -> Self {
        let n = self.norm_sqr();
        let p = self.prec();
        Complex::new(
            Float::with_val(p, &self.re / &n),
            -Float::with_val(p, &self.im / &n),
        )
    }

    pub fn div(&self, other: &Complex) -> Self {
        self * &other.recip()
    }

    /// Principal square root, branch cut on the negative real axis.
    pub fn sqrt(&self) -> Self {
        let p = self.prec();
        if self.is_zero() {
            return Complex::zero(Precision(p));
        }
        let r = self.abs();
        // re(sqrt) = sqrt((r + re)/2) >= 0, im takes the sign of the input.
        let mut half = Float::with_val(p, &r + &self.re);
        half /= 2;
        if half.is_sign_negative() {
            half = Float::new(p);
        }
        let a = half.sqrt();
        if a.is_zero() {
            let mut b = Float::with_val(p, &r - &self.re);
            b /= 2;
            let b = b.sqrt();
            let b = if self.im.is_sign_negative() { -b } else { b };
            return Complex::new(a, b);
        }
        let mut b = Float::with_val(p, &self.im / &a);
        b /= 2;
        Complex::new(a, b)
    }

    /// Integer power by repeated squaring.
    pub fn powu(&self, mut n: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Complex::one(Precision(self.prec()));
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            n >>= 1;
        }
        acc
    }
}

impl Add for &Complex {
    type Output = Complex;
    fn add(self, o: &Complex) -> Complex {
        let p = self.prec().max(o.prec());
        Complex::new(
            Float::with_val(p, &self.re + &o.re),
            Float::with_val(p, &self.im + &o.im),
        )
    }
}

impl Sub for &Complex {
    type Output = Complex;
    fn sub(self, o: &Complex) -> Complex {
        let p = self.prec().max(o.prec());
        Complex::new(
            Float::with_val(p, &self.re - &o.re),
            Float::with_val(p, &self.im - &o.im),
        )
    }
}

impl Mul for &Complex {
    type Output = Complex;
    fn mul(self, o: &Complex) -> Complex {
        let p = self.prec().max(o.prec());
        let mut re = Float::with_val(p, &self.re * &o.re);
        re -= Float::with_val(p, &self.im * &o.im);
        let mut im = Float::with_val(p, &self.re * &o.im);
        im += Float::with_val(p, &self.im * &o.re);
        Complex::new(re, im)
    }
}

impl Neg for &Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex::new(
            Float::with_val(self.re.prec(), -&self.re),
            Float::with_val(self.im.prec(), -&self.im),
        )
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} + {}i",
            self.re.to_string_radix(10, Some(20)),
            self.im.to_string_radix(10, Some(20))
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Precision {
        Precision::new(128).unwrap()
    }

    #[test]
    fn rejects_tiny_precision() {
        assert!(Precision::new(32).is_err());
        assert_eq!(Precision::new(64).unwrap().bits(), 64);
    }

    #[test]
    fn sqrt_is_principal() {
        let z = Complex::from_f64(p(), -4.0, 0.0);
        let r = z.sqrt();
        assert_eq!(r.re, 0);
        assert_eq!(r.im, 2);

        let z = Complex::from_f64(p(), 3.0, -4.0);
        let r = z.sqrt();
        assert_eq!(r.re, 2);
        assert_eq!(r.im, -1);
        let back = &r * &r;
        assert_eq!(back, z);
    }

    #[test]
    fn recip_and_div() {
        let z = Complex::from_f64(p(), 1.0, 1.0);
        let w = z.recip();
        assert_eq!(w.re, 0.5);
        assert_eq!(w.im, -0.5);
        let one = z.div(&z);
        assert_eq!(one, Complex::one(p()));
    }

    #[test]
    fn powu_matches_repeated_product() {
        let z = Complex::from_f64(p(), 0.5, -0.25);
        let mut acc = Complex::one(p());
        for _ in 0..7 {
            acc = &acc * &z;
        }
        let d = (&acc - &z.powu(7)).abs();
        assert!(d < 1e-35);
    }

    #[test]
    fn err_helpers_round_up() {
        let e = err_sum([&err_f64(1e-300), &err_f64(1e-300)]);
        assert!(e >= 2e-300);
        let tiny = err_mul(&Precision::new(4096).unwrap().epsilon(), &err_f64(1.0));
        assert!(tiny > 0);
    }
}
