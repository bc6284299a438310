//! Scalar abstraction: all kernels are generic over `f32`/`f64`.
//!
//! The default everywhere is `f64` so finite-difference gradient checks are
//! meaningful; `f32` is an opt-in speed mode.

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FromPrimitive + ToPrimitive + core::fmt::Debug + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + core::fmt::Debug + Default + Send + Sync + 'static
{
}

/// Lift an `f64` constant into the working precision.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("f64 constant representable")
}

/// Lower a value to `f64` for reporting.
#[inline]
pub fn to_f64<F: Real>(x: F) -> f64 {
    x.to_f64().expect("value representable as f64")
}
