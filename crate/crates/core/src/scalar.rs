//! Scalar abstraction shared by the approximating systems and the integrator.
//!
//! The bounding right-hand sides only use `+ - *`, `min`, `max` and constants,
//! so they evaluate over any ordered field. `f64` is the working type; `f32`
//! works for cheap sweeps and `num_rational::Ratio<i64>` gives exact
//! evaluations for checking inequalities without rounding.

use num_traits::{FromPrimitive, Num, ToPrimitive};
use std::fmt::Debug;

/// An ordered numeric field usable as the state type of an approximating system.
pub trait Real:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable in scalar type")
    }

    #[inline]
    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn clamp_unit(self) -> Self {
        self.max_of(Self::zero()).min_of(Self::one())
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl<T> Real for T where
    T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}
