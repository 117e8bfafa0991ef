//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algorithms are written against [`Real`], which is implemented for
//! `f64` (the fast path) and for [`Mpf`], an MPFR float whose mantissa width
//! is taken from the innermost [`with_precision`] scope on the current thread.

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt::{self, Debug, Display};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

use num_traits::{FromPrimitive, Num, One, ToPrimitive, Zero};
use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

/// Mantissa width used by [`Mpf`] values created outside any precision scope.
pub const DEFAULT_BITS: u32 = 256;

thread_local! {
    static WORKING_BITS: Cell<u32> = const { Cell::new(DEFAULT_BITS) };
}

/// Current working precision for [`Mpf`] construction on this thread.
pub fn working_bits() -> u32 {
    WORKING_BITS.with(|b| b.get())
}

struct BitsGuard(u32);

impl Drop for BitsGuard {
    fn drop(&mut self) {
        WORKING_BITS.with(|b| b.set(self.0));
    }
}

/// Runs `f` with [`Mpf`] values created at `bits` of mantissa.
///
/// Scopes nest; the previous width is restored on exit, including on unwind.
pub fn with_precision<R>(bits: u32, f: impl FnOnce() -> R) -> R {
    let prev = WORKING_BITS.with(|b| b.replace(bits));
    let _guard = BitsGuard(prev);
    f()
}

/// Real scalar used by the spectral, moment and simulation code.
pub trait Real:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Num
    + Neg<Output = Self>
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    /// Mantissa bits actually delivered when `requested` are asked for.
    fn effective_bits(requested: u32) -> u32;

    /// Mantissa bits carried by this particular value.
    fn bits(&self) -> u32;

    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    /// `exp(x) - 1` without cancellation near zero.
    fn exp_m1(&self) -> Self;
    fn ln(&self) -> Self;
    fn abs(&self) -> Self;
    fn powf(&self, e: &Self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    /// Euler Gamma function for positive arguments.
    fn gamma(&self) -> Self;
    fn pi() -> Self;
    fn is_finite(&self) -> bool;

    /// Copy of `self` carried at the current working precision.
    fn rebase(&self) -> Self;

    /// Shortest decimal string that round-trips at this value's precision.
    fn to_decimal(&self) -> String;
    fn parse_decimal(s: &str) -> Option<Self>;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn sq(&self) -> Self {
        self.clone() * self.clone()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Decimal exponent-style `log2(|x|)` as an f64, usable for magnitudes
    /// beyond the f64 range.
    fn log2_abs(&self) -> f64 {
        let a = self.abs();
        if a.is_zero() {
            return f64::NEG_INFINITY;
        }
        a.ln().to_f64_lossy() / std::f64::consts::LN_2
    }
}

impl Real for f64 {
    fn effective_bits(requested: u32) -> u32 {
        requested.min(53)
    }
    fn bits(&self) -> u32 {
        53
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn exp_m1(&self) -> Self {
        f64::exp_m1(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn powf(&self, e: &Self) -> Self {
        f64::powf(*self, *e)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn gamma(&self) -> Self {
        crate::specfun::lanczos_gamma(*self)
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn rebase(&self) -> Self {
        *self
    }
    fn to_decimal(&self) -> String {
        format!("{:e}", self)
    }
    fn parse_decimal(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }
}

/// MPFR-backed float. New values take the thread's [`working_bits`].
#[derive(Clone, PartialEq, PartialOrd)]
pub struct Mpf(Float);

impl Mpf {
    pub fn new(x: f64) -> Self {
        Mpf(Float::with_val(working_bits(), x))
    }

    pub fn from_float(f: Float) -> Self {
        Mpf(f)
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn into_float(self) -> Float {
        self.0
    }

    fn wrap(f: Float) -> Self {
        Mpf(f)
    }

    fn decimal_digits(&self) -> usize {
        // bits * log10(2), plus guard digits so the string round-trips
        (self.0.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2
    }
}

impl Debug for Mpf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mpf({}, {} bits)", self.to_decimal(), self.0.prec())
    }
}

impl Display for Mpf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

macro_rules! mpf_binop {
    ($tr:ident, $m:ident, $atr:ident, $am:ident) => {
        impl $tr for Mpf {
            type Output = Mpf;
            fn $m(self, rhs: Mpf) -> Mpf {
                Mpf::wrap($tr::$m(self.0, rhs.0))
            }
        }
        impl $atr for Mpf {
            fn $am(&mut self, rhs: Mpf) {
                $atr::$am(&mut self.0, rhs.0)
            }
        }
    };
}

mpf_binop!(Add, add, AddAssign, add_assign);
mpf_binop!(Sub, sub, SubAssign, sub_assign);
mpf_binop!(Mul, mul, MulAssign, mul_assign);
mpf_binop!(Div, div, DivAssign, div_assign);

impl Rem for Mpf {
    type Output = Mpf;
    fn rem(self, rhs: Mpf) -> Mpf {
        Mpf::wrap(self.0 % rhs.0)
    }
}

impl Neg for Mpf {
    type Output = Mpf;
    fn neg(self) -> Mpf {
        Mpf::wrap(-self.0)
    }
}

impl Zero for Mpf {
    fn zero() -> Self {
        Mpf(Float::new(working_bits()))
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl One for Mpf {
    fn one() -> Self {
        Mpf(Float::with_val(working_bits(), 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseMpfError;

impl Display for ParseMpfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid decimal float")
    }
}

impl std::error::Error for ParseMpfError {}

impl Num for Mpf {
    type FromStrRadixErr = ParseMpfError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        let parsed = Float::parse_radix(s.trim(), radix as i32).map_err(|_| ParseMpfError)?;
        Ok(Mpf(Float::with_val(working_bits(), parsed)))
    }
}

impl FromPrimitive for Mpf {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Mpf(Float::with_val(working_bits(), n)))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(Mpf(Float::with_val(working_bits(), n)))
    }
    fn from_f64(n: f64) -> Option<Self> {
        n.is_finite().then(|| Mpf::new(n))
    }
}

impl ToPrimitive for Mpf {
    fn to_i64(&self) -> Option<i64> {
        self.0.to_i32_saturating().map(i64::from)
    }
    fn to_u64(&self) -> Option<u64> {
        self.0.to_u32_saturating().map(u64::from)
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.0.to_f64())
    }
}

impl Real for Mpf {
    fn effective_bits(requested: u32) -> u32 {
        requested
    }
    fn bits(&self) -> u32 {
        self.0.prec()
    }
    fn sqrt(&self) -> Self {
        Mpf::wrap(self.0.clone().sqrt())
    }
    fn exp(&self) -> Self {
        Mpf::wrap(self.0.clone().exp())
    }
    fn exp_m1(&self) -> Self {
        Mpf::wrap(self.0.clone().exp_m1())
    }
    fn ln(&self) -> Self {
        Mpf::wrap(self.0.clone().ln())
    }
    fn abs(&self) -> Self {
        Mpf::wrap(self.0.clone().abs())
    }
    fn powf(&self, e: &Self) -> Self {
        Mpf::wrap(self.0.clone().pow(&e.0))
    }
    fn powi(&self, n: i32) -> Self {
        Mpf::wrap(self.0.clone().pow(n))
    }
    fn sin(&self) -> Self {
        Mpf::wrap(self.0.clone().sin())
    }
    fn cos(&self) -> Self {
        Mpf::wrap(self.0.clone().cos())
    }
    fn gamma(&self) -> Self {
        Mpf::wrap(self.0.clone().gamma())
    }
    fn pi() -> Self {
        Mpf(Float::with_val(working_bits(), Constant::Pi))
    }
    fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
    fn rebase(&self) -> Self {
        Mpf(Float::with_val(working_bits(), &self.0))
    }
    fn to_decimal(&self) -> String {
        if self.0.is_zero() {
            return "0".to_string();
        }
        self.0.to_string_radix(10, Some(self.decimal_digits()))
    }
    fn parse_decimal(s: &str) -> Option<Self> {
        Mpf::from_str_radix(s, 10).ok()
    }
}

/// Total order helper for sorting scalars that are known to be finite.
pub fn cmp_finite<T: Real>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Converts between scalar types through the decimal representation, which
/// keeps every digit the source carries.
pub fn convert<S: Real, D: Real>(x: &S) -> D {
    D::parse_decimal(&x.to_decimal()).unwrap_or_else(|| D::lit(x.to_f64_lossy()))
}

/// Euclidean norm of a slice.
pub fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.sq()).sqrt()
}

/// Sum helper; `Iterator::sum` would need `Sum` on the trait.
pub fn sum<T: Real>(it: impl IntoIterator<Item = T>) -> T {
    it.into_iter().fold(T::zero(), |acc, x| acc + x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scopes_nest_and_restore() {
        let outer = working_bits();
        with_precision(128, || {
            assert_eq!(Mpf::one().bits(), 128);
            with_precision(512, || assert_eq!(Mpf::zero().bits(), 512));
            assert_eq!(working_bits(), 128);
        });
        assert_eq!(working_bits(), outer);
    }

    #[test]
    fn decimal_round_trip_keeps_precision() {
        with_precision(300, || {
            let x = Mpf::pi().sqrt();
            let back = Mpf::parse_decimal(&x.to_decimal()).unwrap();
            assert_eq!(x, back);
        });
        let y = 0.1f64 / 3.0;
        assert_eq!(f64::parse_decimal(&y.to_decimal()), Some(y));
    }

    #[test]
    fn conversion_between_backends() {
        let x: Mpf = with_precision(200, || Mpf::lit(2.0).sqrt());
        let y: f64 = convert(&x);
        assert_eq!(y, std::f64::consts::SQRT_2);
        let z: Mpf = with_precision(200, || convert(&y));
        assert_eq!(z.to_f64_lossy(), y);
    }

    #[test]
    fn mpf_gamma_half() {
        with_precision(256, || {
            let g = Mpf::lit(0.5).gamma();
            let sqrt_pi = Mpf::pi().sqrt();
            assert!((g - sqrt_pi).abs().log2_abs() < -250.0);
        });
    }
}
