//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real floating-point type the analysis is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Base-2 logarithm of `1 + x`, accurate for small `x`.
    fn log2_1p(self) -> Self {
        self.ln_1p() / Self::LN_2()
    }

    /// Relative tolerance scaled to the precision of the type: `tol` for
    /// `f64`, and never tighter than a few hundred ulps otherwise.
    fn tol(tol: f64) -> Self {
        Self::lit(tol).max(Self::epsilon() * Self::lit(256.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`] type.
pub type Cplx<T> = Complex<T>;
