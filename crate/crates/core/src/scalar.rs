//! Coefficient fields for the symbolic form algebra.
//!
//! Everything numerical runs in `f64`. The combinatorial identities
//! (d∘d = 0, Whitney duality, commuting Whitney interpolant) can also be
//! evaluated in exact rational arithmetic through [`Rational`].

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational scalar.
pub type Rational = BigRational;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    /// Conversion of a mesh coordinate. Exact for binary floats in the rational field.
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl Scalar for Rational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite coordinate")
    }
    fn to_f64(&self) -> f64 {
        self.to_f64_lossy()
    }
    fn is_zero(&self) -> bool {
        <BigRational as Zero>::is_zero(self)
    }
    fn abs_f64(&self) -> f64 {
        self.abs().to_f64_lossy()
    }
}

trait ToF64Lossy {
    fn to_f64_lossy(&self) -> f64;
}

impl ToF64Lossy for BigRational {
    fn to_f64_lossy(&self) -> f64 {
        match ToPrimitive::to_f64(self) {
            Some(v) => v,
            None => {
                let n = self.numer().to_f64().unwrap_or(f64::NAN);
                let d = self.denom().to_f64().unwrap_or(f64::NAN);
                n / d
            }
        }
    }
}

/// n! as a scalar.
pub fn factorial<S: Scalar>(n: usize) -> S {
    let mut acc = S::one();
    for i in 2..=n {
        acc = acc * S::from_i64(i as i64);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_roundtrip_of_binary_coordinates() {
        let q = Rational::from_f64(0.375);
        assert_eq!(q, Rational::from_i64(3) / Rational::from_i64(8));
        assert_eq!(Scalar::to_f64(&q), 0.375);
    }

    #[test]
    fn factorials() {
        assert_eq!(factorial::<f64>(5), 120.0);
        assert_eq!(factorial::<Rational>(0), Rational::from_i64(1));
    }
}
