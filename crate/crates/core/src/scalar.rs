//! Scalar abstraction for the spectral kernel math.
//!
//! Knot vectors, B-spline evaluation, the closed-form transforms and the
//! univariate/tensor models are written against [`Real`] so they can run in
//! `f32` as well as `f64`. Likelihoods, simulation and anything touching
//! dense linear algebra are `f64` only.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the kernel math.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for types that cannot represent
    /// finite `f64` values, which no implementor does.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Normalised sinc, `sin(πx)/(πx)`, with the removable singularity filled.
pub fn sinc<T: Real>(x: T) -> T {
    let px = T::PI() * x;
    if px.abs() < T::lit(1e-4) {
        // Taylor to x^4 is below f64 epsilon at this cutoff.
        let p2 = px * px;
        T::one() - p2 / T::lit(6.0) + p2 * p2 / T::lit(120.0)
    } else {
        px.sin() / px
    }
}
