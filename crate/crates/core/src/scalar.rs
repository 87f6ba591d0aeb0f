//! Scalar abstraction: the whole engine is generic over the sample type.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Floating-point sample type the engine operates on: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
}

/// Shorthand for lifting an `f64` constant into the scalar type.
#[inline]
pub(crate) fn c<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// Standard normal probability density function.
pub fn norm_pdf<T: Real>(x: T) -> T {
    let inv_sqrt_2pi = c::<T>(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-x * x / c(2.0)).exp()
}

/// Standard normal cumulative distribution function.
///
/// Abramowitz-Stegun 26.2.17 rational approximation, absolute error < 7.5e-8.
pub fn norm_cdf<T: Real>(x: T) -> T {
    if x < c(-12.0) {
        return T::zero();
    }
    if x > c(12.0) {
        return T::one();
    }
    let abs_x = x.abs();
    let t = T::one() / (T::one() + c::<T>(0.231_641_9) * abs_x);
    let poly = t
        * (c::<T>(0.319_381_530)
            + t * (c::<T>(-0.356_563_782)
                + t * (c::<T>(1.781_477_937)
                    + t * (c::<T>(-1.821_255_978) + t * c::<T>(1.330_274_429)))));
    let cdf = T::one() - norm_pdf(abs_x) * poly;
    if x >= T::zero() {
        cdf
    } else {
        T::one() - cdf
    }
}
