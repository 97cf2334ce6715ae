//! Floating point abstraction shared by the numerical modules.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Real scalar used by the fugacity machinery, the PDE solver, the exact
/// generator toolkit and the analysis statistics.
///
/// Implemented for `f32` and `f64`. Tolerances quoted throughout the crate
/// (round trips to `1e-10`, stationarity residuals to `1e-12`) assume `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon scaled tolerance used when a bisection is allowed to stop.
    #[inline]
    fn bisection_tol() -> Self {
        Self::epsilon() * Self::of(8.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
