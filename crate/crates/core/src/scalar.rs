//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All matrices, masks and model outputs are generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. Random draws are always made in `f64` and
//! cast, so a seed produces the same structural choices for either width.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

mod private {
    pub trait Sealed {}
    impl Sealed for f32 {}
    impl Sealed for f64 {}
}

/// Floating point type usable for series values, masks and fitness.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
    + private::Sealed
{
    /// Lossy conversion from `f64`.
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        <Self as NumCast>::from(v).unwrap_or_else(Self::nan)
    }

    /// Widening conversion to `f64` (exact for both implementations).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Bit pattern of the value widened to `f64`; distinct values map to
    /// distinct patterns.
    #[inline]
    fn key_bits(self) -> u64 {
        self.as_f64().to_bits()
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as NumCast>::from(n).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
