//! Floating-point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by every numeric routine in the crate.
///
/// Besides the usual float arithmetic, each implementation carries the
/// precision-dependent constants used for probability clamping and
/// sum-to-one validation, since `1 - 1e-12` is not representable in `f32`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Floor applied to predicted probabilities and inside clamped logarithms.
    const PROB_FLOOR: f64;
    /// Allowed deviation of a probability table's total mass from one.
    const SUM_TOLERANCE: f64;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn prob_floor() -> Self {
        Self::lit(Self::PROB_FLOOR)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const PROB_FLOOR: f64 = 1e-12;
    const SUM_TOLERANCE: f64 = 1e-9;
}

impl Scalar for f32 {
    const PROB_FLOOR: f64 = 1e-7;
    const SUM_TOLERANCE: f64 = 1e-5;
}
