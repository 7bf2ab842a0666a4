//! Scalar abstraction shared by every numerical module.
//!
//! All geometry, oracles and estimators are written against [`Real`], so the
//! same code runs in `f32` (cheap sanity runs) and `f64` (everything that feeds
//! a report). Configuration and report types stay in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

use crate::Point;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant or configuration value (rounding for `f32`).
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine-epsilon scaled tolerance, never tighter than `floor`.
    #[inline]
    fn tol(floor: f64) -> Self {
        Self::lit(floor).max(Self::epsilon() * Self::lit(8.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Builds a point from `f64` coordinates.
#[inline]
pub fn pt<T: Real>(re: f64, im: f64) -> Point<T> {
    Point::new(T::lit(re), T::lit(im))
}

#[inline]
pub(crate) fn is_finite_point<T: Real>(w: Point<T>) -> bool {
    w.re.is_finite() && w.im.is_finite()
}

/// Shifts a point by real flow time `t`.
#[inline]
pub fn shift<T: Real>(w: Point<T>, t: T) -> Point<T> {
    Point::new(w.re + t, w.im)
}
