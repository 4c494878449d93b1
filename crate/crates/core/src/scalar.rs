//! Floating-point abstraction shared by the generic numerical modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the distribution and special-function code is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances that are stated in absolute
/// terms (for example the Lambert W residual bound) are floored at a small
/// multiple of the type's machine epsilon so that `f32` callers get a
/// meaningful bound instead of an unreachable one.
pub trait Scalar: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// `max(tol, k * epsilon)`.
    #[inline]
    fn tol_floor(tol: f64, k: f64) -> Self {
        Self::lit(tol).max(Self::lit(k) * Self::epsilon())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
