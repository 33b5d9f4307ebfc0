//! Scalar abstraction: the crate's numerics are generic over the float type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar usable throughout the crate.
///
/// Blanket-implemented for anything with the required arithmetic, constants,
/// and conversions — in practice `f64` (the default choice) and `f32`.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + NumAssign
        + FromPrimitive
        + ScalarOperand
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Convert an `f64` constant to the working scalar type.
#[inline]
pub fn sc<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must be representable in the scalar type")
}
