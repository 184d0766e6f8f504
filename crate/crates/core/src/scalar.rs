//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the crate is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `exp(i * theta)`.
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

pub fn real<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Sum with Neumaier compensation; summation order is the iteration order.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

pub fn compensated_sum_complex<T: Real, I: IntoIterator<Item = Complex<T>>>(values: I) -> Complex<T> {
    let (re, im): (Vec<T>, Vec<T>) = values.into_iter().map(|z| (z.re, z.im)).unzip();
    Complex::new(compensated_sum(re), compensated_sum(im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0e16_f64, 1.0, -1.0e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn lit_roundtrips_for_f32() {
        assert_eq!(<f32 as Real>::lit(0.5), 0.5_f32);
    }
}
