//! Scalar abstraction shared by the geometry, metric and model code.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the numeric code is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; panics only for types that cannot hold finite f64 values.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("scalar conversion from f64")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar conversion to f64")
    }

    /// Short dtype tag used in checkpoints.
    const DTYPE: &'static str;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
}
