//! Numeric abstraction shared by the metric and assignment code.
//!
//! Everything that produces a score or a cost is generic over [`Scalar`], so
//! the same code runs with `f64`, `f32`, plain integers (assignment costs) or
//! exact rationals (`Ratio<i64>`) when bit-exact identities are wanted.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Numeric type usable for weights, scores and assignment costs.
pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Absolute slack under which two values of magnitude `scale` are
    /// considered equal. Exact types return zero.
    fn tie_tolerance(scale: Self) -> Self;

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn abs_val(self) -> Self {
        if self < Self::zero() {
            Self::zero() - self
        } else {
            self
        }
    }

    fn min_val(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn tie_tolerance(scale: Self) -> Self {
        scale.abs().max(1.0) * 1e-9
    }
}

impl Scalar for f32 {
    fn tie_tolerance(scale: Self) -> Self {
        scale.abs().max(1.0) * 1e-4
    }
}

macro_rules! exact_scalar {
    ($($t:ty),*) => {
        $(impl Scalar for $t {
            fn tie_tolerance(_scale: Self) -> Self {
                <$t as num_traits::Zero>::zero()
            }
        })*
    };
}

exact_scalar!(i32, i64, Ratio<i64>);
