use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

/// Floating point scalar used by the geometric core.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumCast + Debug + Default + Send + Sync + 'static
{
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("literal fits scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }

    /// Tolerance appropriate for orthonormality checks at this precision.
    fn frame_tolerance() -> Self;
}

impl Real for f32 {
    fn frame_tolerance() -> Self {
        1e-5
    }
}

impl Real for f64 {
    fn frame_tolerance() -> Self {
        1e-10
    }
}
