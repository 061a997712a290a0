//! Scalar abstraction shared by the DSP and training code.

use std::fmt::Display;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use rustfft::FftNum;

/// Floating-point sample type the library is generic over.
///
/// Implemented for `f32` and `f64`. The shipped pipeline runs in `f64`; the
/// generic bound exists so callers can trade precision for speed where the
/// tolerances allow it.
pub trait Sample: Float + FromPrimitive + NumAssign + FftNum + Sum + Display {
    /// Converts an `f64` constant into `Self` (lossy for `f32`).
    fn from_f64_const(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constants convert to f32/f64")
    }

    /// Widens to `f64` for reporting and serialization.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f32/f64 widen to f64")
    }
}

impl Sample for f32 {}
impl Sample for f64 {}
