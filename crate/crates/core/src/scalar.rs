//! Scalar abstraction shared by the combinatorial and model code.
//!
//! Everything that only needs field arithmetic is written against [`Scalar`], so
//! the same routine runs in `f64` for production and in exact rationals
//! ([`Exact`]) when it serves as a test oracle. The closed-form asymptotic
//! constants need transcendental functions and use [`Real`] (`f32`/`f64`).

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, Num, ToPrimitive};

/// Exact rational arithmetic.
pub type Exact = BigRational;

pub trait Scalar: Num + Neg<Output = Self> + Clone + PartialOrd + Debug + Send + Sync {
    fn from_usize(n: usize) -> Self;

    /// Lossless for `f64` and [`Exact`]; `f32` rounds.
    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn is_zero_value(&self) -> bool {
        *self == Self::zero()
    }
}

/// Floating-point scalars with the usual transcendental functions.
pub trait Real: Scalar + Float {}

impl Scalar for f64 {
    fn from_usize(n: usize) -> Self {
        n as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn from_usize(n: usize) -> Self {
        n as f32
    }
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Real for f64 {}
impl Real for f32 {}

impl Scalar for BigRational {
    fn from_usize(n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Builds an exact rational `num / den`.
pub fn ratio(num: i64, den: i64) -> Exact {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_conversion_into_rationals_is_lossless() {
        let x = 0.1_f64;
        let q = <Exact as Scalar>::from_f64(x);
        assert_eq!(Scalar::to_f64(&q), x);
        assert_ne!(q, ratio(1, 10));
    }

    #[test]
    fn generic_code_runs_on_all_scalars() {
        fn poly<T: Scalar>(x: T) -> T {
            x.clone() * x - T::from_usize(2)
        }
        assert_eq!(poly(2.0_f64), 2.0);
        assert_eq!(poly(2.0_f32), 2.0);
        assert_eq!(poly(ratio(3, 2)), ratio(1, 4));
    }
}
