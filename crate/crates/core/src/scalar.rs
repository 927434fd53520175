//! Scalar abstraction shared by every geometric routine in the crate.

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Floating point scalar usable by the geometry, registration and detection code.
///
/// Implemented for `f32` and `f64`. All literals inside generic code go through
/// [`Real::lit`] so the same algorithm runs in either precision.
pub trait Real: RealField + Copy + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        nalgebra::convert(v)
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        nalgebra::convert(n as f64)
    }

    /// Widens (or narrows) to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Unsigned magnitude.
    #[inline]
    fn magnitude(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Total order on scalars that treats NaN as larger than everything.
#[inline]
pub(crate) fn cmp_real<T: Real>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| {
        // NaN sorts last
        match (a.as_f64().is_nan(), b.as_f64().is_nan()) {
            (false, true) => std::cmp::Ordering::Less,
            (true, false) => std::cmp::Ordering::Greater,
            _ => std::cmp::Ordering::Equal,
        }
    })
}
