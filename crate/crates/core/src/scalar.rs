//! Scalar abstraction: every numerical routine in this crate is generic over a
//! floating-point type. `f64` is the type used by the CLI and the stated
//! tolerances; `f32` works for exploratory use at correspondingly looser
//! tolerances.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar usable throughout the crate.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` constant.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in scalar type")
    }

    /// Lossy view as `f64`, for diagnostics and error messages.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Two, as a scalar. Shows up constantly in variance algebra.
#[inline]
pub(crate) fn two<T: Scalar>() -> T {
    T::one() + T::one()
}

/// One half.
#[inline]
pub(crate) fn half<T: Scalar>() -> T {
    T::one() / two()
}
