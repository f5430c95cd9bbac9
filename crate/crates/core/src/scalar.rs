//! Floating-point abstraction so the whole model can run in `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use rand::distr::uniform::SampleUniform;

/// Scalar type every model, estimator and consolidator is generic over.
///
/// `f64` is what the command-line harness uses (see [`crate::Real`]); `f32`
/// halves the memory footprint of large sweeps at the cost of precision.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + SampleUniform
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` constant into the scalar type.
///
/// Panics if the value is not representable, which cannot happen for the
/// finite model constants this crate feeds it.
#[inline]
pub fn real<S: Scalar>(x: f64) -> S {
    S::from(x).expect("constant not representable by scalar type")
}
